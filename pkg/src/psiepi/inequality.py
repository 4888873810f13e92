"""The S statistic and the quantities derived from it.

Conventions used throughout: states are indexed 0..n, measurements are keyed
by pairs ``(j1, j2)`` with ``1 <= j1 < j2 <= n`` in lexicographic order, and
outcome ``i`` of measurement ``(j1, j2)`` is paired with state ``j_i`` where
``j_0 = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from itertools import combinations
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    DegenerateDenominator,
    DimensionMismatch,
    EtaOutOfRange,
    InvalidScenario,
    InvalidTable,
    KeyMismatch,
    NoThreshold,
    NotViolating,
)
from .quantum import (
    COMPLETENESS_TOL,
    Measurement,
    PureState,
    born_probability,
    quantum_overlap,
    validate_measurement,
)

PROB_TOL = 1e-9
DENOMINATOR_MIN = 1e-6
FIELDS = ("real", "complex")


def pair_keys(n: int) -> list[tuple[int, int]]:
    return list(combinations(range(1, n + 1), 2))


def n_pairs(n: int) -> int:
    return n * (n - 1) // 2


@dataclass(frozen=True, eq=False)
class Scenario:
    """States psi_0..psi_n and one three-outcome measurement per pair.

    Construction checks the structural invariants and caches the overlaps
    omega_Q(psi_0, psi_j); POVM validity of the measurements is checked by
    :meth:`problems`, not here, so that broken inputs can still be inspected.
    """

    states: tuple
    measurements: Mapping
    field: str = "real"
    overlaps: tuple = dc_field(init=False)

    def __post_init__(self):
        states = tuple(self.states)
        if len(states) < 4:
            raise InvalidScenario(f"need n+1 >= 4 states, got {len(states)}")
        if self.field not in FIELDS:
            raise InvalidScenario(f"field must be 'real' or 'complex', got {self.field!r}")
        dim = states[0].dim
        for j, s in enumerate(states):
            if not isinstance(s, PureState):
                raise InvalidScenario(f"state {j} is not a PureState")
            if s.dim != dim:
                raise DimensionMismatch(f"state {j} has dimension {s.dim}, expected {dim}")
            if self.field == "real" and not s.is_real:
                raise InvalidScenario(f"state {j} is complex in a real scenario")
        n = len(states) - 1
        keys = pair_keys(n)
        meas = dict(self.measurements)
        if sorted(meas) != keys:
            raise KeyMismatch(f"expected one measurement per pair {keys}, got {sorted(meas)}")
        ordered = {}
        for k in keys:
            m = meas[k]
            if not isinstance(m, Measurement):
                m = Measurement.from_matrices(m)
            if m.dim != dim:
                raise DimensionMismatch(f"measurement {k} has dimension {m.dim}, expected {dim}")
            ordered[k] = m
        overlaps = tuple(quantum_overlap(states[0], s) for s in states[1:])
        if sum(overlaps) <= DENOMINATOR_MIN:
            raise DegenerateDenominator(f"sum of overlaps with psi_0 is {sum(overlaps)!r}")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "measurements", ordered)
        object.__setattr__(self, "overlaps", overlaps)

    @property
    def dim(self) -> int:
        return self.states[0].dim

    @property
    def n(self) -> int:
        return len(self.states) - 1

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return list(self.measurements)

    @property
    def overlap_sum(self) -> float:
        return float(sum(self.overlaps))

    def problems(self, tol: float = COMPLETENESS_TOL) -> list[str]:
        """Human-readable list of violated measurement invariants (empty if valid)."""
        out = []
        for k, m in self.measurements.items():
            diag = validate_measurement(m, tol)
            if not diag.hermitian_ok:
                out.append(f"measurement {k} is not Hermitian")
            if not diag.psd_ok:
                out.append(f"measurement {k} has eigenvalues outside [0, 1] "
                           f"(min {diag.min_eigenvalue:.3g}, max {diag.max_eigenvalue:.3g})")
            if diag.completeness_residual > tol:
                out.append(f"measurement {k} effects do not sum to identity "
                           f"(residual {diag.completeness_residual:.3g})")
        return out


@dataclass(frozen=True, eq=False)
class ProbabilityTable:
    """p[(j1, j2)] = (P(m0|psi_0), P(m1|psi_j1), P(m2|psi_j2))."""

    entries: Mapping

    def __post_init__(self):
        entries = {}
        for k in sorted(self.entries):
            v = np.array(self.entries[k], dtype=float)
            if v.shape != (3,):
                raise InvalidTable(f"entry {k} must hold 3 probabilities, got shape {v.shape}")
            v.flags.writeable = False
            entries[tuple(k)] = v
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_array(cls, pairs: Iterable, values) -> "ProbabilityTable":
        values = np.asarray(values, dtype=float)
        return cls({k: values[i] for i, k in enumerate(pairs)})

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return list(self.entries)

    def as_array(self) -> np.ndarray:
        """(n_pairs, 3) array in key order."""
        return np.array([self.entries[k] for k in self.entries]).reshape(-1, 3)

    def total(self) -> float:
        return float(np.sum(self.as_array()))

    def shifted(self, eps: float) -> "ProbabilityTable":
        return ProbabilityTable.from_array(self.pairs, self.as_array() + eps)


@dataclass(frozen=True)
class ScoreReport:
    s: float
    kappa0_bound: float
    numerator: float
    denominator: float
    per_pair_sums: dict


def born_table(scenario: Scenario) -> ProbabilityTable:
    """Noiseless Born-rule probabilities for every (pair, outcome)."""
    st = scenario.states
    entries = {}
    for (j1, j2), m in scenario.measurements.items():
        entries[(j1, j2)] = [born_probability(st[j], e) for j, e in zip((0, j1, j2), m.effects)]
    return ProbabilityTable(entries)


def _checked_sums(scenario: Scenario, table: ProbabilityTable) -> list[float]:
    if table.pairs != scenario.pairs:
        raise KeyMismatch(f"table keys {table.pairs} do not match scenario pairs {scenario.pairs}")
    arr = table.as_array()
    if np.any(~np.isfinite(arr)) or np.any(arr < -PROB_TOL) or np.any(arr > 1 + PROB_TOL):
        raise InvalidTable("table entries must lie in [0, 1]")
    if scenario.overlap_sum <= DENOMINATOR_MIN:
        raise DegenerateDenominator(f"sum of overlaps is {scenario.overlap_sum!r}")
    return [float(np.sum(v)) for v in table.entries.values()]


def _eta_numerator(sums: list[float], eta: float) -> float:
    num = 1.0
    for x in sums:
        num += (1.0 - eta) + eta * x
    return num


def s_value(scenario: Scenario, table: ProbabilityTable) -> ScoreReport:
    """S = (1 + sum of the 3 n(n-1)/2 probabilities) / sum_j omega_Q(psi_0, psi_j).

    S >= 1 for every maximally psi-epistemic model; more generally S bounds
    min_j omega_C/omega_Q from above, which ``kappa0_bound`` reports.
    """
    sums = _checked_sums(scenario, table)
    num = _eta_numerator(sums, 1.0)
    den = scenario.overlap_sum
    s = num / den
    return ScoreReport(
        s=s,
        kappa0_bound=min(s, 1.0),
        numerator=num,
        denominator=den,
        per_pair_sums=dict(zip(scenario.pairs, sums)),
    )


def s_eta(scenario: Scenario, table: ProbabilityTable, eta: float) -> float:
    """S when no-click events are reported as outcome m0 at detection efficiency ``eta``.

    ``table`` holds the unit-efficiency probabilities.
    """
    if not 0.0 <= eta <= 1.0:
        raise EtaOutOfRange(f"eta must be in [0, 1], got {eta!r}")
    sums = _checked_sums(scenario, table)
    return _eta_numerator(sums, eta) / scenario.overlap_sum


def efficiency_threshold(scenario: Scenario, table: ProbabilityTable) -> float:
    """Detection efficiency above which S^(eta) < 1.

    A value >= 1 means the scenario cannot beat 1 even with perfect detectors.
    """
    sums = _checked_sums(scenario, table)
    npairs = len(sums)
    denom = npairs - sum(sums)
    if denom <= 0:
        raise NoThreshold("probability sums reach n(n-1)/2; S^(eta) is constant or increasing")
    return (1.0 + npairs - scenario.overlap_sum) / denom


def noise_robustness(scenario: Scenario, theory_table: ProbabilityTable) -> float:
    """Largest uniform increase of every probability that keeps S <= 1."""
    sums = _checked_sums(scenario, theory_table)
    gap = scenario.overlap_sum - 1.0 - sum(sums)
    if gap < -1e-12:
        raise NotViolating(f"S >= 1 already (gap {gap!r}); no noise margin")
    return max(gap, 0.0) / (3 * len(sums))
