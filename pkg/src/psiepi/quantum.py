"""Pure states, three-outcome measurements and Born-rule quantities."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import BadDimension, DimensionMismatch, NonFinite, NotNormalized, ZeroNorm

MIN_DIM = 2
MAX_DIM = 8
NORM_TOL = 1e-9
COMPLETENESS_TOL = 1e-8


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.flags.writeable = False
    return arr


def _as_vector(coeffs) -> np.ndarray:
    arr = np.asarray(coeffs)
    if arr.ndim != 1:
        raise BadDimension(f"amplitudes must be a 1-d vector, got shape {arr.shape}")
    if not (MIN_DIM <= arr.size <= MAX_DIM):
        raise BadDimension(f"dimension must be in [{MIN_DIM}, {MAX_DIM}], got {arr.size}")
    if np.iscomplexobj(arr):
        arr = arr.astype(np.complex128)
        if not np.any(arr.imag):
            arr = arr.real.copy()
    else:
        arr = arr.astype(np.float64)
    if not np.all(np.isfinite(arr)):
        raise NonFinite("amplitudes contain NaN or Inf")
    return arr


@dataclass(frozen=True, eq=False)
class PureState:
    """Unit vector in a real or complex Hilbert space of dimension 2..8.

    The constructor checks normalisation but never rescales; use
    :func:`make_state` to normalise arbitrary amplitudes.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        arr = _as_vector(self.coeffs)
        norm = np.linalg.norm(arr)
        if abs(norm - 1.0) > NORM_TOL:
            raise NotNormalized(f"state is not normalised (norm={norm!r})")
        object.__setattr__(self, "coeffs", _frozen(arr))

    @property
    def dim(self) -> int:
        return self.coeffs.size

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.coeffs)

    def projector(self) -> np.ndarray:
        return np.outer(self.coeffs, self.coeffs.conj())

    def __repr__(self):
        return f"PureState({self.coeffs.tolist()!r})"


def make_state(coeffs) -> PureState:
    """Return the normalised state with the given amplitudes."""
    arr = _as_vector(coeffs)
    norm = np.linalg.norm(arr)
    if norm <= 1e-12:
        raise ZeroNorm("cannot normalise an (almost) zero vector")
    return PureState(arr / norm)


@dataclass(frozen=True, eq=False)
class Effect:
    """One measurement operator. Only the shape is checked on construction;
    positivity and Hermiticity are reported by :func:`validate_measurement`."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise BadDimension(f"effect must be square, got shape {m.shape}")
        if not (MIN_DIM <= m.shape[0] <= MAX_DIM):
            raise BadDimension(f"dimension must be in [{MIN_DIM}, {MAX_DIM}], got {m.shape[0]}")
        m = m.astype(np.complex128) if np.iscomplexobj(m) else m.astype(np.float64)
        if np.iscomplexobj(m) and not np.any(m.imag):
            m = m.real.copy()
        if not np.all(np.isfinite(m)):
            raise NonFinite("effect contains NaN or Inf")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class Measurement:
    """Three effects (outcomes m0, m1, m2) on the same space."""

    effects: tuple

    def __post_init__(self):
        effects = tuple(e if isinstance(e, Effect) else Effect(e) for e in self.effects)
        if len(effects) != 3:
            raise BadDimension(f"a measurement has exactly 3 effects, got {len(effects)}")
        dims = {e.dim for e in effects}
        if len(dims) != 1:
            raise DimensionMismatch(f"effects have different dimensions: {sorted(dims)}")
        object.__setattr__(self, "effects", effects)

    @property
    def dim(self) -> int:
        return self.effects[0].dim

    @classmethod
    def from_matrices(cls, matrices: Sequence) -> "Measurement":
        return cls(tuple(Effect(m) for m in matrices))

    @classmethod
    def from_frame(cls, u1, u2) -> "Measurement":
        """Rank-1 triad: E1 = |u1><u1|, E2 = |u2><u2|, E0 the complement."""
        u1 = np.asarray(u1)
        u2 = np.asarray(u2)
        e1 = np.outer(u1, u1.conj())
        e2 = np.outer(u2, u2.conj())
        e0 = np.eye(u1.size) - e1 - e2
        return cls((Effect(e0), Effect(e1), Effect(e2)))


class MeasurementDiagnostics(NamedTuple):
    psd_ok: bool
    hermitian_ok: bool
    completeness_residual: float
    min_eigenvalue: float
    max_eigenvalue: float

    def ok(self, tol: float = COMPLETENESS_TOL) -> bool:
        return self.psd_ok and self.hermitian_ok and self.completeness_residual <= tol


def _check_dims(a: PureState, b) -> None:
    if a.dim != b.dim:
        raise DimensionMismatch(f"dimension {a.dim} does not match {b.dim}")


def born_probability(state: PureState, effect: Effect) -> float:
    """<psi|E|psi>, clamped onto [0, 1] when it lies within 1e-9 of the interval."""
    _check_dims(state, effect)
    psi = state.coeffs
    p = float(np.real(np.vdot(psi, effect.matrix @ psi)))
    if -NORM_TOL <= p < 0.0:
        return 0.0
    if 1.0 < p <= 1.0 + NORM_TOL:
        return 1.0
    return p


def fidelity(a: PureState, b: PureState) -> float:
    """|<a|b>|^2."""
    _check_dims(a, b)
    return float(min(abs(np.vdot(a.coeffs, b.coeffs)) ** 2, 1.0))


def overlap_from_fidelity(f):
    """1 - sqrt(1 - f), vectorised."""
    return 1.0 - np.sqrt(np.clip(1.0 - f, 0.0, None))


def infidelity(a: PureState, b: PureState) -> float:
    """1 - |<a|b>|^2 without cancellation, via Lagrange's identity on the wedge a ^ b."""
    _check_dims(a, b)
    i, j = np.triu_indices(a.dim, 1)

    def wedge(x, y):
        return np.sum(np.abs(x[i] * y[j] - x[j] * y[i]) ** 2)

    # averaging both orders keeps the result exactly symmetric
    return float(min(0.5 * (wedge(a.coeffs, b.coeffs) + wedge(b.coeffs, a.coeffs)), 1.0))


def quantum_overlap(a: PureState, b: PureState) -> float:
    """omega_Q = 1 - sqrt(1 - |<a|b>|^2), accurate near identical states."""
    return float(1.0 - np.sqrt(infidelity(a, b)))


def discrimination_success(a: PureState, b: PureState) -> float:
    """Optimal probability of telling ``a`` from ``b`` given equal priors."""
    return 1.0 - quantum_overlap(a, b) / 2.0


def validate_measurement(m: Measurement, tol: float = COMPLETENESS_TOL) -> MeasurementDiagnostics:
    if not tol > 0:
        raise ValueError("tol must be positive")
    dims = {e.dim for e in m.effects}
    if len(dims) != 1:
        raise DimensionMismatch(f"effects have different dimensions: {sorted(dims)}")
    herm_dev = 0.0
    lo, hi = np.inf, -np.inf
    total = np.zeros((m.dim, m.dim), dtype=np.result_type(*(e.matrix for e in m.effects)))
    for e in m.effects:
        mat = e.matrix
        herm_dev = max(herm_dev, float(np.max(np.abs(mat - mat.conj().T))))
        w = np.linalg.eigvalsh((mat + mat.conj().T) / 2)
        lo = min(lo, float(w[0]))
        hi = max(hi, float(w[-1]))
        total = total + mat
    residual = float(np.max(np.abs(total - np.eye(m.dim))))
    psd_ok = lo >= -tol and hi <= 1.0 + tol
    return MeasurementDiagnostics(psd_ok, herm_dev <= tol, residual, lo, hi)
