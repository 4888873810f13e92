"""Statistics-level simulation of the photon-counting experiment.

Imperfections are applied to probabilities, not to an optical model:

* preparation error: each state psi_j is replaced once per run by a random
  state with fidelity F to it, F ~ Normal(prep_fidelity_mean, prep_fidelity_sd)
  clipped to [0, 1];
* measurement error: each pair's outcome probabilities are mixed toward 1/3,
  p -> p (1 - f) + f / 3, with f ~ Normal(meas_fidelity_drop_mean, sd) clipped
  to [0, 1];
* counting noise: heralds ~ Poisson(counts_per_setting (1 + drift)),
  clicks ~ Binomial(heralds, p * detection_efficiency).
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field, fields, replace
from typing import Mapping

import numpy as np

from . import seeding
from .errors import EmptySetting, InvalidScenario, KeyMismatch
from .inequality import ProbabilityTable, Scenario, born_table, s_value
from .quantum import PureState

# numpy's Poisson sampler is used below this mean, a rounded normal above it
POISSON_NORMAL_CUTOFF = 1e6


@dataclass(frozen=True)
class NoiseModel:
    counts_per_setting: float = 2e4
    prep_fidelity_mean: float = 0.998
    prep_fidelity_sd: float = 0.002
    meas_fidelity_drop_mean: float = 0.0007
    meas_fidelity_drop_sd: float = 0.0002
    detection_efficiency: float = 1.0
    drift_sd: float = 0.0

    def __post_init__(self):
        if not self.counts_per_setting > 0:
            raise ValueError("counts_per_setting must be positive")
        for name in ("prep_fidelity_mean", "meas_fidelity_drop_mean"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        for name in ("prep_fidelity_sd", "meas_fidelity_drop_sd", "drift_sd"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 < self.detection_efficiency <= 1.0:
            raise ValueError("detection_efficiency must lie in (0, 1]")

    @classmethod
    def off(cls, counts_per_setting: float = 2e4) -> "NoiseModel":
        """Perfect preparation and measurement; only counting noise remains."""
        return cls(counts_per_setting, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def with_updates(self, **kw) -> "NoiseModel":
        return replace(self, **kw)


@dataclass(frozen=True, eq=False)
class CountRecord:
    """Clicks and heralds per (pair, outcome); arrays are (n_pairs, 3) in pair order."""

    pairs: tuple
    clicks: np.ndarray
    heralds: np.ndarray
    seed: int
    noise: NoiseModel = dc_field(default_factory=NoiseModel)

    def __post_init__(self):
        clicks = np.array(self.clicks, dtype=np.int64).reshape(-1, 3)
        heralds = np.array(self.heralds, dtype=np.int64).reshape(-1, 3)
        if clicks.shape != heralds.shape or clicks.shape[0] != len(self.pairs):
            raise ValueError("clicks/heralds must be (n_pairs, 3)")
        if np.any(clicks < 0) or np.any(clicks > heralds):
            raise ValueError("need 0 <= clicks <= heralds for every setting")
        clicks.flags.writeable = False
        heralds.flags.writeable = False
        object.__setattr__(self, "pairs", tuple(tuple(p) for p in self.pairs))
        object.__setattr__(self, "clicks", clicks)
        object.__setattr__(self, "heralds", heralds)

    @property
    def entries(self) -> Mapping:
        """{(j1, j2, i): (clicks, heralds)}."""
        return {(j1, j2, i): (int(self.clicks[p, i]), int(self.heralds[p, i]))
                for p, (j1, j2) in enumerate(self.pairs) for i in range(3)}


@dataclass(frozen=True, eq=False)
class SEstimate:
    s_hat: float
    sigma: float
    bootstrap_samples: int
    table_hat: ProbabilityTable
    bootstrap_values: np.ndarray = dc_field(repr=False, default=None)


def _truncated_normal(rng, mean, sd, size=None):
    return np.clip(rng.normal(mean, sd, size) if sd > 0 else np.full(size or (), mean), 0.0, 1.0)


def perturb_state(state: PureState, fid: float, rng: np.random.Generator) -> np.ndarray:
    """Random unit vector whose fidelity with ``state`` is exactly ``fid``."""
    psi = state.coeffs
    if fid >= 1.0:
        return psi.copy()
    r = rng.standard_normal(psi.size)
    if not state.is_real:
        r = r + 1j * rng.standard_normal(psi.size)
    r = r - psi * np.vdot(psi, r)
    r /= np.linalg.norm(r)
    return np.sqrt(fid) * psi + np.sqrt(1.0 - fid) * r


def perturb_table(scenario: Scenario, noise: NoiseModel, seed: int) -> ProbabilityTable:
    """Born table with preparation and measurement imperfections applied."""
    if not isinstance(scenario, Scenario):
        raise InvalidScenario("perturb_table expects a Scenario")
    rng = seeding.rng(seed, seeding.NOISE)
    fids = _truncated_normal(rng, noise.prep_fidelity_mean, noise.prep_fidelity_sd, scenario.n + 1)
    prepared = [perturb_state(s, f, rng) for s, f in zip(scenario.states, fids)]
    drops = _truncated_normal(rng, noise.meas_fidelity_drop_mean, noise.meas_fidelity_drop_sd,
                              len(scenario.pairs))
    entries = {}
    for p, ((j1, j2), m) in enumerate(scenario.measurements.items()):
        probs = np.array([np.real(np.vdot(prepared[j], e.matrix @ prepared[j]))
                          for j, e in zip((0, j1, j2), m.effects)])
        probs = probs * (1.0 - drops[p]) + drops[p] / 3.0
        entries[(j1, j2)] = np.clip(probs, 0.0, 1.0)
    return ProbabilityTable(entries)


def poisson(rng: np.random.Generator, lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    small = lam <= POISSON_NORMAL_CUTOFF
    out = np.empty(lam.shape, dtype=np.int64)
    out[small] = rng.poisson(lam[small])
    big = lam[~small]
    if big.size:
        out[~small] = np.maximum(np.rint(big + np.sqrt(big) * rng.standard_normal(big.shape)), 0)
    return out


def simulate_counts(table: ProbabilityTable, noise: NoiseModel, seed: int) -> CountRecord:
    """Poisson heralds and binomial clicks for every setting of ``table``."""
    rng = seeding.rng(seed, seeding.COUNTS)
    probs = np.clip(table.as_array(), 0.0, 1.0)
    drift = rng.normal(0.0, noise.drift_sd, probs.shape) if noise.drift_sd > 0 else np.zeros(probs.shape)
    rate = noise.counts_per_setting * np.maximum(1.0 + drift, 0.0)
    heralds = poisson(rng, rate)
    clicks = rng.binomial(heralds, probs * noise.detection_efficiency)
    return CountRecord(tuple(table.pairs), clicks, heralds, seed, noise)


def _check_keys(record: CountRecord, scenario: Scenario) -> None:
    if list(record.pairs) != scenario.pairs:
        raise KeyMismatch(f"record pairs {list(record.pairs)} do not match scenario {scenario.pairs}")


def estimated_table(record: CountRecord) -> ProbabilityTable:
    if np.any(record.heralds == 0):
        p, i = np.argwhere(record.heralds == 0)[0]
        raise EmptySetting(f"setting {record.pairs[p]} outcome {i} has no heralded events")
    return ProbabilityTable.from_array(record.pairs, record.clicks / record.heralds)


def estimate_s(record: CountRecord, scenario: Scenario, bootstrap: int = 200, seed: int = 0) -> SEstimate:
    """S from click ratios, with a Poisson parametric-bootstrap standard error.

    Overlaps come from the scenario's designed states. Each resample draws
    clicks* ~ Poisson(clicks) and heralds* ~ Poisson(heralds) per setting.
    """
    if bootstrap < 1:
        raise ValueError("bootstrap must be >= 1")
    _check_keys(record, scenario)
    table = estimated_table(record)
    s_hat = s_value(scenario, table).s
    rng = seeding.rng(seed, seeding.BOOTSTRAP)
    shape = (bootstrap,) + record.clicks.shape
    c = poisson(rng, np.broadcast_to(record.clicks, shape))
    h = poisson(rng, np.broadcast_to(record.heralds, shape))
    p = np.minimum(c / np.maximum(h, 1), 1.0)
    values = (1.0 + p.sum(axis=(1, 2))) / scenario.overlap_sum
    sigma = float(np.std(values, ddof=1)) if bootstrap > 1 else 0.0
    return SEstimate(s_hat, sigma, bootstrap, table, values)


def deviation_histogram(record: CountRecord, scenario: Scenario) -> list[float]:
    """Estimated minus Born probabilities, ordered by pair then outcome."""
    _check_keys(record, scenario)
    est = estimated_table(record).as_array()
    theory = born_table(scenario).as_array()
    return (est - theory).ravel().tolist()
