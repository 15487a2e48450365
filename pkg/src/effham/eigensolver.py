"""Cell-problem operators as Metzler matrices and their principal eigenpairs.

Four assemblies (continuous/discrete x plain/averaged switching) produce dense
matrices with nonnegative off-diagonal entries whose principal eigenvalue is
the effective Hamiltonian at momentum p.  The continuous operators are
discretized with an exponentially fitted (locally tilted generator) scheme:

* hop weights are exp(-2 * half-step potential increment) / (2 h^2), so every
  off-diagonal entry is positive regardless of the drift strength,
* the momentum enters only through factors e^{+-p_a h} on the hops, exactly as
  in the discrete model, so rows sum to zero at p = 0 and the eigenvalue of a
  constant-coefficient operator is a cosh-type expression converging to the
  continuum value at second order,
* under pointwise detailed balance the matrix at -p is the adjoint of the
  matrix at +p in the weighted inner product exp(-2 psi^i(y_k)), so the
  spectrum (and hence the Hamiltonian) is symmetric to solver precision, not
  merely to discretization order.

Eigenpairs come with Collatz-Wielandt certificates: for any positive vector w,
min_i (Mw)_i/w_i and max_i (Mw)_i/w_i sandwich the principal eigenvalue, and
iteration stops only once that sandwich is tighter than the tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
import numpy as np

from .chains import averaged_hop_rates, generator_at, stationary_measure
from .fields import grid_points
from .model import ContinuousModel, DiscreteModel, _strongly_connected

_EPS = np.finfo(float).eps


class PecletError(ValueError):
    """Grid too coarse for the drift field; carries the minimal admissible N."""

    def __init__(self, message: str, minimal_n: int):
        super().__init__(message)
        self.minimal_n = minimal_n


class ConvergenceError(RuntimeError):
    """Eigensolver hit the iteration cap; the best certificate is attached."""

    def __init__(self, message: str, certificate: "EigenCertificate"):
        super().__init__(message)
        self.certificate = certificate


@dataclass(frozen=True)
class AssembledOperator:
    """Dense Metzler matrix for one cell problem, with index bookkeeping."""

    matrix: np.ndarray
    kind: str            # "discrete_I" | "discrete_II" | "continuous_I" | "continuous_II"
    n_space: int         # grid points (N**d) or torus sites (ell)
    n_states: int        # chemical states carried by the matrix rows (1 if averaged out)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=float)
        n = self.n_space * self.n_states
        if M.shape != (n, n):
            raise ValueError(f"matrix shape {M.shape} does not match {n} rows")
        object.__setattr__(self, "matrix", M)

    @property
    def shape(self):
        return self.matrix.shape

    def row_state(self, row: int) -> tuple:
        """Map a matrix row to its (space index, chemical state)."""
        return row % self.n_space, row // self.n_space

    def row_index(self, space: int, state: int = 0) -> int:
        return state * self.n_space + space

    def dump(self, path) -> None:
        """Coordinate-triplet text dump (row, col, value) of nonzero entries."""
        M = self.matrix
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# row col value\n")
            rows, cols = np.nonzero(M)
            for r, c in zip(rows, cols):
                fh.write(f"{r} {c} {M[r, c]:.17g}\n")


@dataclass(frozen=True)
class EigenCertificate:
    """Principal eigenpair plus the Collatz-Wielandt sandwich that proves it."""

    eigenvalue: float
    eigenvector: np.ndarray      # strictly positive, max component 1
    residual: float              # ||M g - lambda g||_inf
    cw_lower: float
    cw_upper: float
    iterations: int

    @property
    def cw_gap(self) -> float:
        return self.cw_upper - self.cw_lower

    def __post_init__(self):
        g = np.asarray(self.eigenvector, dtype=float)
        if np.any(g <= 0):
            raise ValueError("certificate eigenvector must be strictly positive")
        g.setflags(write=False)
        object.__setattr__(self, "eigenvector", g)


def _check_metzler_irreducible(M: np.ndarray, context: str) -> None:
    off = M.copy()
    np.fill_diagonal(off, 0.0)
    assert np.all(off >= 0), f"{context}: Metzler violation (negative off-diagonal)"
    if M.shape[0] > 1 and not _strongly_connected(off):
        raise ValueError(f"{context}: assembled operator is reducible")


# ---------------------------------------------------------------------------
# discrete assemblies
# ---------------------------------------------------------------------------

def assemble_discrete_I(model: DiscreteModel, p: float,
                        gamma: float = 1.0) -> AssembledOperator:
    """Hop + switching operator on (ell * J) states, hop weights tilted by e^{+-p}.

    `gamma` scales the switching block; gamma -> infinity is the fast-switching
    regime whose limit is `assemble_discrete_II`.
    """
    ell, J = model.ell, model.J
    n = ell * J
    ep, em = math.exp(p), math.exp(-p)
    M = np.zeros((n, n))
    for i in range(J):
        base = i * ell
        for k in range(ell):
            row = base + k
            rp = model.hop_rates_plus[i, k]
            rm = model.hop_rates_minus[i, k]
            M[row, base + (k + 1) % ell] += rp * ep
            M[row, base + (k - 1) % ell] += rm * em
            diag = -(rp + rm)
            for j in range(J):
                if j == i:
                    continue
                r = gamma * model.switching[i, j, k]
                M[row, j * ell + k] += r
                diag -= r
            M[row, row] += diag
    _check_metzler_irreducible(M, "assemble_discrete_I")
    return AssembledOperator(M, "discrete_I", ell, J,
                             {"p": p, "ell": ell, "J": J, "gamma": gamma,
                              "regime": "I"})


def assemble_discrete_II(model: DiscreteModel, p: float) -> AssembledOperator:
    """Averaged hop operator on ell sites, rates rbar_+-(k) from the stationary
    measure of the switching chain at each site."""
    ell = model.ell
    ep, em = math.exp(p), math.exp(-p)
    M = np.zeros((ell, ell))
    for k in range(ell):
        rp, rm = averaged_hop_rates(model, k)
        M[k, (k + 1) % ell] += rp * ep
        M[k, (k - 1) % ell] += rm * em
        M[k, k] += -(rp + rm)
    _check_metzler_irreducible(M, "assemble_discrete_II")
    return AssembledOperator(M, "discrete_II", ell, 1,
                             {"p": p, "ell": ell, "J": model.J, "regime": "II"})


# ---------------------------------------------------------------------------
# continuous assemblies
# ---------------------------------------------------------------------------

def _as_momentum(p, dim: int) -> np.ndarray:
    vec = np.atleast_1d(np.asarray(p, dtype=float))
    if vec.shape != (dim,):
        raise ValueError(f"momentum {p!r} does not match model dimension {dim}")
    return vec


def _neighbor_tables(N: int, dim: int):
    """Flat index arrays of the +1 and -1 neighbor along each axis."""
    idx = np.arange(N ** dim).reshape((N,) * dim)
    ups = [np.roll(idx, -1, axis=a).ravel() for a in range(dim)]
    downs = [np.roll(idx, +1, axis=a).ravel() for a in range(dim)]
    return ups, downs


def _peclet_guard(max_drift: float, h: float, period: float, N: int,
                  context: str) -> None:
    if max_drift * h > 1.0:
        n_min = int(math.ceil(max_drift * period)) + 1
        raise PecletError(
            f"{context}: grid with N={N} does not resolve drift "
            f"(max |p - drift| = {max_drift:.3g}); need N >= {n_min}", n_min)


def assemble_continuous_I(model: ContinuousModel, p, N: int) -> AssembledOperator:
    """Tilted-generator discretization of the J-state cell operator on N**d points."""
    if N < 3:
        raise ValueError("continuous assembly needs N >= 3")
    dim, J = model.dim, model.J
    pvec = _as_momentum(p, dim)
    period = model.period
    h = period / N
    ng = N ** dim
    pts = grid_points(dim, N, period)

    grad_bound = 0.0
    for a in range(dim):
        for psi in model.potentials:
            g = psi.gradients(pts)[:, a]
            grad_bound = max(grad_bound,
                             float(np.max(np.abs(pvec[a] - g))))
    _peclet_guard(grad_bound, h, period, N, "assemble_continuous_I")

    fac = 1.0 / (2.0 * h * h)
    ups, downs = _neighbor_tables(N, dim)
    n = ng * J
    M = np.zeros((n, n))
    rows_per_state = np.arange(ng)
    for i, psi in enumerate(model.potentials):
        base = i * ng
        rows = base + rows_per_state
        vals = psi.periodic_values(pts)
        diag = np.zeros(ng)
        for a in range(dim):
            mid_pts = pts.copy()
            mid_pts[:, a] += 0.5 * h
            mids = psi.periodic_values(mid_pts)   # psi at (y + h/2 e_a)
            # half-step increments: periodic part by evaluation, affine part
            # analytically so the torus seam carries the same local tilt
            tilt = float(psi.slope[a]) * 0.5 * h
            up_w = fac * np.exp(-2.0 * ((mids - vals) + tilt))
            dn_w = fac * np.exp(-2.0 * ((mids[downs[a]] - vals) - tilt))
            M[rows, base + ups[a]] += up_w * math.exp(pvec[a] * h)
            M[rows, base + downs[a]] += dn_w * math.exp(-pvec[a] * h)
            diag -= up_w + dn_w
        for j in range(J):
            if j == i:
                continue
            entry = model.rates.entries[i][j]
            if entry is None:
                continue
            r = entry.values(pts)
            if np.min(r) < -1e-12 * max(1.0, float(np.max(np.abs(r)))):
                raise ValueError(f"negative switching rate sampled in r[{i+1}][{j+1}]")
            r = np.clip(r, 0.0, None)   # fields touching zero round to -1e-16
            M[rows, j * ng + rows_per_state] += r
            diag -= r
        M[rows, rows] += diag
    _check_metzler_irreducible(M, "assemble_continuous_I")
    return AssembledOperator(M, "continuous_I", ng, J,
                             {"p": tuple(pvec), "N": N, "dim": dim, "J": J,
                              "period": period, "regime": "I"})


def assemble_continuous_II(model: ContinuousModel, p, N: int) -> AssembledOperator:
    """Averaged scalar cell operator: drift is the stationary-measure average of
    the potential gradients; hop weights use mu-weighted potential increments so
    the J=1 / equal-potentials / constant-rates cases reduce exactly."""
    if N < 3:
        raise ValueError("continuous assembly needs N >= 3")
    dim, J = model.dim, model.J
    pvec = _as_momentum(p, dim)
    period = model.period
    h = period / N
    ng = N ** dim
    pts = grid_points(dim, N, period)

    def mu_at(points: np.ndarray) -> np.ndarray:
        out = np.empty((len(points), J))
        for r, y in enumerate(points):
            out[r] = stationary_measure(generator_at(model.rates, y))
        return out

    grads = np.stack([psi.gradients(pts) for psi in model.potentials])  # (J, ng, d)
    mu_grid = mu_at(pts)
    bbar = np.einsum("gj,jga->ga", mu_grid, grads)
    grad_bound = float(np.max(np.abs(pvec[None, :] - bbar)))
    _peclet_guard(grad_bound, h, period, N, "assemble_continuous_II")

    fac = 1.0 / (2.0 * h * h)
    ups, downs = _neighbor_tables(N, dim)
    M = np.zeros((ng, ng))
    rows = np.arange(ng)
    vals = np.stack([psi.periodic_values(pts) for psi in model.potentials])  # (J, ng)
    slopes = np.stack([psi.slope for psi in model.potentials])               # (J, d)
    diag = np.zeros(ng)
    for a in range(dim):
        mid_pts = pts.copy()
        mid_pts[:, a] += 0.5 * h
        mids = np.stack([psi.periodic_values(mid_pts) for psi in model.potentials])
        q1_pts = pts.copy()
        q1_pts[:, a] += 0.25 * h
        q3_pts = pts.copy()
        q3_pts[:, a] += 0.75 * h
        mu_q1 = mu_at(q1_pts)   # governs the increment y -> y + h/2
        mu_q3 = mu_at(q3_pts)   # governs the increment y + h/2 -> y + h
        tilt = slopes[:, a][:, None] * 0.5 * h                               # (J, 1)
        inc_up = np.einsum("gj,jg->g", mu_q1, (mids - vals) + tilt)
        inc_dn_src = np.einsum("gj,jg->g", mu_q3, (mids - vals[:, ups[a]]) - tilt)
        up_w = fac * np.exp(-2.0 * inc_up)
        dn_w = fac * np.exp(-2.0 * inc_dn_src[downs[a]])
        M[rows, ups[a]] += up_w * math.exp(pvec[a] * h)
        M[rows, downs[a]] += dn_w * math.exp(-pvec[a] * h)
        diag -= up_w + dn_w
    M[rows, rows] += diag
    _check_metzler_irreducible(M, "assemble_continuous_II")
    return AssembledOperator(M, "continuous_II", ng, 1,
                             {"p": tuple(pvec), "N": N, "dim": dim, "J": J,
                              "period": period, "regime": "II"})


# ---------------------------------------------------------------------------
# principal eigenpair with Collatz-Wielandt certificate
# ---------------------------------------------------------------------------

def collatz_wielandt_bounds(M, g: np.ndarray) -> tuple:
    """(min_i (Mg)_i/g_i, max_i (Mg)_i/g_i); a sandwich for the principal
    eigenvalue of a Metzler irreducible M, valid for any positive g."""
    M = M.matrix if isinstance(M, AssembledOperator) else np.asarray(M, dtype=float)
    g = np.asarray(g, dtype=float)
    if np.any(g <= 0):
        raise ValueError("Collatz-Wielandt bounds need a strictly positive vector")
    ratios = (M @ g) / g
    return float(np.min(ratios)), float(np.max(ratios))


def principal_eigenpair(M, tol: float = 1e-10,
                        max_iter: int = 10 ** 6) -> EigenCertificate:
    """Principal eigenpair of a Metzler irreducible matrix.

    Shifts by alpha = 1 + max |M_ii| so the matrix is nonnegative and primitive,
    then runs power iteration from the all-ones vector.  When the shift makes
    plain power iteration too slow (stiff continuous operators), it switches to
    inverse iteration with sigma just above the current Collatz-Wielandt upper
    bound; (sigma I - M) is then a nonsingular M-matrix, so the solve preserves
    positivity and every iterate still carries a valid sandwich.  Terminates
    when the sandwich width is below tol * (1 + |lambda|) (with a floor at the
    round-off level of the shifted matrix).
    """
    A = M.matrix if isinstance(M, AssembledOperator) else np.asarray(M, dtype=float)
    n = A.shape[0]
    if n == 1:
        lam = float(A[0, 0])
        return EigenCertificate(lam, np.ones(1), 0.0, lam, lam, 0)

    alpha = 1.0 + float(np.max(np.abs(np.diag(A))))
    w = np.ones(n)
    lower, upper = -np.inf, np.inf
    iters = 0
    power_budget = 40

    def bounds_from(vec):
        z = A @ vec + alpha * vec
        ratios = z / vec
        return z, float(np.min(ratios)) - alpha, float(np.max(ratios)) - alpha

    def threshold(lo, up):
        lam_est = 0.5 * (lo + up)
        return max(tol * (1.0 + abs(lam_est)), 4.0 * _EPS * (alpha + abs(lam_est)))

    while True:
        z, lo, up = bounds_from(w)
        lower, upper = max(lower, lo), min(upper, up)
        iters += 1
        if upper - lower <= threshold(lower, upper):
            break
        if iters >= max_iter:
            lam = 0.5 * (lower + upper)
            g = w / np.max(w)
            cert = EigenCertificate(lam, g, float(np.max(np.abs(A @ g - lam * g))),
                                    lower, upper, iters)
            raise ConvergenceError(
                f"no convergence after {iters} iterations "
                f"(CW gap {upper - lower:.3e})", cert)
        if iters < power_budget:
            w = z / np.max(z)
            continue
        # inverse-iteration step: sigma strictly above the principal eigenvalue
        gap = upper - lower
        sigma = upper + max(gap, 16.0 * _EPS * (alpha + abs(upper)))
        shifted = -A.copy()
        shifted[np.diag_indices(n)] += sigma
        try:
            x = np.linalg.solve(shifted, w)
        except np.linalg.LinAlgError:
            x = None
        if x is None or np.any(x <= 0):
            # singular or positivity lost to round-off: relax sigma, take a
            # plain power step to restore a safely positive iterate
            power_budget = iters + 4
            w = z / np.max(z)
            continue
        w = x / np.max(x)

    lam = 0.5 * (lower + upper)
    g = w / np.max(w)
    residual = float(np.max(np.abs(A @ g - lam * g)))
    return EigenCertificate(lam, g, residual, lower, upper, iters)
