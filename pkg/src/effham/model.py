"""Switching-process models: continuous drift-diffusion and discrete hop models.

Both models couple a spatial motion (diffusion in a family of periodic
potentials, or a nearest-neighbour walk with per-state hop rates) to a finite
chemical state that switches with position-dependent rates.  `validate` checks
the structural assumptions the downstream solvers rely on (nonnegative rates,
strictly positive hop rates, irreducible coupling) and returns a report rather
than raising.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import List, Optional, Union

import numpy as np

from .fields import PeriodicScalarField, grid_points, sampling_resolution

REGIMES = ("I", "II")


class ModelFormatError(ValueError):
    """Malformed model description (JSON schema violation, shape mismatch)."""


@dataclass(frozen=True)
class SwitchingRateMatrix:
    """J x J array of rate fields r_ij(y); the diagonal is ignored."""

    J: int
    entries: tuple  # J x J of PeriodicScalarField or None on the diagonal

    def __post_init__(self):
        if self.J < 1:
            raise ValueError("J must be >= 1")
        rows = tuple(tuple(row) for row in self.entries)
        if len(rows) != self.J or any(len(r) != self.J for r in rows):
            raise ValueError(f"rate matrix must be {self.J}x{self.J}")
        dims = set()
        periods = set()
        for i, row in enumerate(rows):
            for j, entry in enumerate(row):
                if i == j or entry is None:
                    continue
                if not isinstance(entry, PeriodicScalarField):
                    raise TypeError("rate entries must be PeriodicScalarField")
                if not entry.is_periodic():
                    raise ValueError(f"rate field r[{i}][{j}] must be periodic "
                                     "(no affine tilt)")
                dims.add(entry.dim)
                periods.add(entry.period)
        if len(dims) > 1 or len(periods) > 1:
            raise ValueError("all rate fields must share dim and period")
        object.__setattr__(self, "entries", rows)

    def rate(self, i: int, j: int, y) -> float:
        if i == j:
            return 0.0
        entry = self.entries[i][j]
        return 0.0 if entry is None else entry.value(y)

    def rates_at(self, y) -> np.ndarray:
        """Full J x J rate matrix at a point (diagonal zero)."""
        R = np.zeros((self.J, self.J))
        for i in range(self.J):
            for j in range(self.J):
                if i != j:
                    R[i, j] = self.rate(i, j, y)
        return R

    def sup_matrix(self, points_per_axis: Optional[int] = None) -> np.ndarray:
        """Entrywise sup over a sampling lattice (used for irreducibility)."""
        fields = self.iter_fields()
        if not fields:
            return np.zeros((self.J, self.J))
        n = points_per_axis or sampling_resolution(fields)
        pts = grid_points(fields[0].dim, n, fields[0].period)
        S = np.zeros((self.J, self.J))
        for i in range(self.J):
            for j in range(self.J):
                if i != j and self.entries[i][j] is not None:
                    S[i, j] = float(np.max(self.entries[i][j].values(pts)))
        return S

    def iter_fields(self) -> list:
        return [e for i, row in enumerate(self.entries)
                for j, e in enumerate(row) if i != j and e is not None]


@dataclass(frozen=True)
class ContinuousModel:
    """Diffusion in per-state potentials, switching at rates r_ij(y)."""

    dim: int
    J: int
    potentials: tuple  # J PeriodicScalarField
    rates: SwitchingRateMatrix
    regime: str = "I"

    def __post_init__(self):
        pots = tuple(self.potentials)
        if len(pots) != self.J:
            raise ValueError(f"expected {self.J} potentials, got {len(pots)}")
        for psi in pots:
            if psi.dim != self.dim:
                raise ValueError("all potentials must share the model dimension")
        periods = {psi.period for psi in pots}
        if len(periods) > 1:
            raise ValueError("all potentials must share the period")
        if self.rates.J != self.J:
            raise ValueError("rate matrix size must equal J")
        for f in self.rates.iter_fields():
            if f.dim != self.dim or f.period != pots[0].period:
                raise ValueError("rate fields must share dim and period with "
                                 "the potentials")
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}")
        object.__setattr__(self, "potentials", pots)

    @property
    def period(self) -> float:
        return self.potentials[0].period

    def drift(self, y, i: int) -> np.ndarray:
        """Spatial drift -grad psi^i(y)."""
        return -self.potentials[i].gradient(y)


@dataclass(frozen=True)
class DiscreteModel:
    """Nearest-neighbour walk on a torus of `ell` sites with chemical switching."""

    ell: int
    J: int
    hop_rates_plus: np.ndarray   # (J, ell), > 0
    hop_rates_minus: np.ndarray  # (J, ell), > 0
    switching: np.ndarray        # (J, J, ell), >= 0, diagonal ignored
    regime: str = "I"

    def __post_init__(self):
        if self.ell < 2:
            raise ValueError("torus length ell must be >= 2")
        if self.J < 1:
            raise ValueError("J must be >= 1")
        rp = np.asarray(self.hop_rates_plus, dtype=float)
        rm = np.asarray(self.hop_rates_minus, dtype=float)
        sw = np.asarray(self.switching, dtype=float)
        if rp.shape != (self.J, self.ell) or rm.shape != (self.J, self.ell):
            raise ValueError(f"hop rate arrays must have shape ({self.J}, {self.ell})")
        if sw.shape != (self.J, self.J, self.ell):
            raise ValueError(
                f"switching array must have shape ({self.J}, {self.J}, {self.ell})")
        if not (np.isfinite(rp).all() and np.isfinite(rm).all()
                and np.isfinite(sw).all()):
            raise ValueError("rates must be finite")
        for arr in (rp, rm, sw):
            arr.setflags(write=False)
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}")
        object.__setattr__(self, "hop_rates_plus", rp)
        object.__setattr__(self, "hop_rates_minus", rm)
        object.__setattr__(self, "switching", sw)

    def switching_at(self, k: int) -> np.ndarray:
        """J x J switching-rate matrix at site k (diagonal zeroed)."""
        R = np.array(self.switching[:, :, k])
        np.fill_diagonal(R, 0.0)
        return R

    def sup_switching(self) -> np.ndarray:
        S = np.max(self.switching, axis=2)
        np.fill_diagonal(S, 0.0)
        return S


Model = Union[ContinuousModel, DiscreteModel]


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    kind: str
    location: str
    detail: str

    def __str__(self):
        return f"{self.kind} at {self.location}: {self.detail}"


def _strongly_connected(adj: np.ndarray) -> bool:
    """Strong connectivity of the digraph of positive entries (exact)."""
    n = adj.shape[0]
    if n == 1:
        return True

    def reachable(mat):
        seen = np.zeros(n, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            u = stack.pop()
            for v in np.nonzero(mat[u] > 0)[0]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(int(v))
        return seen.all()

    return reachable(adj) and reachable(adj.T)


def validate(model: Model) -> List[Violation]:
    """Check the structural assumptions the solvers rely on.

    Returns a list of violations; an empty list means the model is valid.
    Purely a sampling check for continuous rate fields (fields are
    band-limited, so the lattice from `sampling_resolution` is conclusive
    in practice).
    """
    report: List[Violation] = []
    if isinstance(model, ContinuousModel):
        rate_fields = model.rates.iter_fields()
        n = sampling_resolution(list(model.potentials) + rate_fields)
        pts = grid_points(model.dim, n, model.period)
        for i in range(model.J):
            for j in range(model.J):
                if i == j:
                    continue
                entry = model.rates.entries[i][j]
                if entry is None:
                    continue
                vals = entry.values(pts)
                k = int(np.argmin(vals))
                tol = 1e-12 * max(1.0, float(np.max(np.abs(vals))))
                if vals[k] < -tol:
                    report.append(Violation(
                        "negative_rate", f"r[{i+1}][{j+1}], y={tuple(pts[k])}",
                        f"sampled value {vals[k]:.3e} < 0"))
        if model.J >= 2 and not _strongly_connected(model.rates.sup_matrix()):
            report.append(Violation(
                "reducible_coupling", "sup-matrix of switching rates",
                "positive-entry digraph is not strongly connected"))
    elif isinstance(model, DiscreteModel):
        for sign, arr in (("+", model.hop_rates_plus), ("-", model.hop_rates_minus)):
            bad = np.argwhere(arr <= 0)
            for i, k in bad:
                report.append(Violation(
                    "nonpositive_hop_rate", f"r{sign}[{i+1}](k={k})",
                    f"value {arr[i, k]:.3e} must be > 0"))
        neg = np.argwhere(model.switching < 0)
        for i, j, k in neg:
            if i != j:
                report.append(Violation(
                    "negative_rate", f"r[{i+1}][{j+1}](k={k})",
                    f"value {model.switching[i, j, k]:.3e} < 0"))
        if model.J >= 2 and not _strongly_connected(model.sup_switching()):
            report.append(Violation(
                "reducible_coupling", "sup-matrix of switching rates",
                "positive-entry digraph is not strongly connected"))
    else:
        raise TypeError(f"not a model: {type(model)!r}")
    return report


# ---------------------------------------------------------------------------
# JSON schema
# ---------------------------------------------------------------------------

_FIELD_KEYS = {"coeffs", "slope"}
_CONT_KEYS = {"kind", "dim", "J", "regime", "potentials", "rates", "period"}
_DISC_KEYS = {"kind", "ell", "J", "regime", "hop_rates_plus", "hop_rates_minus",
              "switching"}


def _field_from_json(obj, dim: int, period: float) -> PeriodicScalarField:
    if not isinstance(obj, dict):
        raise ModelFormatError(f"field must be an object, got {type(obj).__name__}")
    unknown = set(obj) - _FIELD_KEYS
    if unknown:
        raise ModelFormatError(f"unknown field keys {sorted(unknown)}")
    modes = []
    for entry in obj.get("coeffs", []):
        if len(entry) != dim + 2:
            raise ModelFormatError(
                f"coeff entry {entry} must have {dim} wave numbers plus (a, b)")
        modes.append((tuple(entry[:dim]), float(entry[dim]), float(entry[dim + 1])))
    slope = tuple(float(s) for s in obj.get("slope", []))
    if slope and len(slope) != dim:
        raise ModelFormatError(f"slope {slope} must have length {dim}")
    return PeriodicScalarField(dim=dim, period=period, fourier_coeffs=tuple(modes),
                               affine_slope=slope)


def _field_to_json(f: Optional[PeriodicScalarField]):
    if f is None:
        return None
    return {
        "coeffs": [list(k) + [a, b] for (k, a, b) in f.fourier_coeffs],
        "slope": list(f.affine_slope),
    }


def model_from_dict(obj: dict) -> Model:
    if not isinstance(obj, dict):
        raise ModelFormatError("model description must be a JSON object")
    kind = obj.get("kind")
    if kind == "continuous":
        unknown = set(obj) - _CONT_KEYS
        if unknown:
            raise ModelFormatError(f"unknown model keys {sorted(unknown)}")
        try:
            dim = int(obj["dim"])
            J = int(obj["J"])
            regime = str(obj["regime"])
            period = float(obj.get("period", 1.0))
            pots = tuple(_field_from_json(p, dim, period) for p in obj["potentials"])
            raw = obj["rates"]
            entries = tuple(
                tuple(None if (i == j or raw[i][j] is None)
                      else _field_from_json(raw[i][j], dim, period)
                      for j in range(J))
                for i in range(J))
        except (KeyError, IndexError, TypeError) as exc:
            raise ModelFormatError(f"malformed continuous model: {exc}") from exc
        try:
            return ContinuousModel(dim=dim, J=J, potentials=pots,
                                   rates=SwitchingRateMatrix(J=J, entries=entries),
                                   regime=regime)
        except ValueError as exc:
            raise ModelFormatError(str(exc)) from exc
    if kind == "discrete":
        unknown = set(obj) - _DISC_KEYS
        if unknown:
            raise ModelFormatError(f"unknown model keys {sorted(unknown)}")
        try:
            return DiscreteModel(
                ell=int(obj["ell"]), J=int(obj["J"]), regime=str(obj["regime"]),
                hop_rates_plus=np.asarray(obj["hop_rates_plus"], dtype=float),
                hop_rates_minus=np.asarray(obj["hop_rates_minus"], dtype=float),
                switching=np.asarray(obj["switching"], dtype=float))
        except (KeyError, ValueError, TypeError) as exc:
            raise ModelFormatError(f"malformed discrete model: {exc}") from exc
    raise ModelFormatError(f'model "kind" must be "continuous" or "discrete", '
                           f"got {kind!r}")


def model_to_dict(model: Model) -> dict:
    if isinstance(model, ContinuousModel):
        return {
            "kind": "continuous",
            "dim": model.dim,
            "J": model.J,
            "regime": model.regime,
            "period": model.period,
            "potentials": [_field_to_json(p) for p in model.potentials],
            "rates": [[_field_to_json(model.rates.entries[i][j]) if i != j else None
                       for j in range(model.J)] for i in range(model.J)],
        }
    if isinstance(model, DiscreteModel):
        return {
            "kind": "discrete",
            "ell": model.ell,
            "J": model.J,
            "regime": model.regime,
            "hop_rates_plus": model.hop_rates_plus.tolist(),
            "hop_rates_minus": model.hop_rates_minus.tolist(),
            "switching": model.switching.tolist(),
        }
    raise TypeError(f"not a model: {type(model)!r}")


def load_model(path) -> Model:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"invalid JSON in {path}: {exc}") from exc
    return model_from_dict(obj)


def dump_model(model: Model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=2, sort_keys=True)
        fh.write("\n")
