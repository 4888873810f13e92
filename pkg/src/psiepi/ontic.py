"""Finite ontological models used as a brute-force check of the overlap theorem.

A model has L ontic states. Preparation j induces the distribution
``epistemic[j]`` over them; measurement (j1, j2) answers outcome i in ontic
state l with probability ``responses[(j1, j2)][i, l]``. Responses do not
depend on the preparation.

For every such model

    sum_j omega_C(mu_0, mu_j) <= 1 + sum_{j1<j2} sum_i P(m_i | psi_{j_i}),

which follows from two pointwise bounds checked separately below:

    min(mu_0, mu_a, mu_b) <= sum_i xi_i mu_{j_i}            (per pair)
    sum_j min(mu_0, mu_j) - mu_0 <= sum_{j1<j2} min(mu_0, mu_j1, mu_j2)
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from . import kernels, seeding
from .errors import BadN, KeyMismatch, LengthMismatch, NotADistribution
from .inequality import ProbabilityTable, Scenario, pair_keys

DIST_TOL = 1e-12
MAX_LAMBDA = 4096


def _distribution(x, name="distribution") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise NotADistribution(f"{name} must be a non-empty 1-d array")
    if np.any(~np.isfinite(x)) or np.any(x < 0) or abs(x.sum() - 1.0) > 1e-9:
        raise NotADistribution(f"{name} must be non-negative and sum to 1")
    return x


def classical_overlap(a, b) -> float:
    """sum_l min(a_l, b_l), i.e. one minus the total-variation distance."""
    a = _distribution(a, "a")
    b = _distribution(b, "b")
    if a.size != b.size:
        raise LengthMismatch(f"lengths differ: {a.size} vs {b.size}")
    return float(np.sum(np.minimum(a, b)))


def triple_overlap(a, b, c) -> float:
    a, b, c = (np.asarray(v, dtype=float) for v in (a, b, c))
    if not a.shape == b.shape == c.shape:
        raise LengthMismatch("the three distributions must have equal length")
    return float(np.sum(np.minimum(np.minimum(a, b), c)))


@dataclass(frozen=True, eq=False)
class FiniteOnticModel:
    epistemic: np.ndarray
    responses: Mapping

    def __post_init__(self):
        mu = np.array(self.epistemic, dtype=float)
        if mu.ndim != 2:
            raise ValueError("epistemic must be an (n+1, L) matrix")
        n = mu.shape[0] - 1
        if n < 3:
            raise BadN(f"n must be >= 3, got {n}")
        if not 1 <= mu.shape[1] <= MAX_LAMBDA:
            raise ValueError(f"lambda_count must be in [1, {MAX_LAMBDA}]")
        if np.any(mu < 0) or np.any(np.abs(mu.sum(axis=1) - 1.0) > DIST_TOL):
            raise NotADistribution("every epistemic row must be a probability distribution")
        resp = {}
        for k in sorted(self.responses):
            xi = np.array(self.responses[k], dtype=float)
            if xi.shape != (3, mu.shape[1]):
                raise ValueError(f"response {k} must be 3 x L")
            if np.any(xi < 0) or np.any(np.abs(xi.sum(axis=0) - 1.0) > DIST_TOL):
                raise NotADistribution(f"response {k} columns must be distributions over outcomes")
            j1, j2 = k
            if not 1 <= j1 < j2 <= n:
                raise KeyMismatch(f"bad pair {k} for n={n}")
            xi.flags.writeable = False
            resp[tuple(k)] = xi
        mu.flags.writeable = False
        object.__setattr__(self, "epistemic", mu)
        object.__setattr__(self, "responses", resp)

    @property
    def lambda_count(self) -> int:
        return self.epistemic.shape[1]

    @property
    def n(self) -> int:
        return self.epistemic.shape[0] - 1

    @property
    def pairs(self) -> list:
        return list(self.responses)

    def _arrays(self):
        pairs = self.pairs
        ia = np.array([p[0] for p in pairs], dtype=np.int64)
        ib = np.array([p[1] for p in pairs], dtype=np.int64)
        xi = np.array([self.responses[p] for p in pairs]).reshape(len(pairs), 3, self.lambda_count)
        return np.ascontiguousarray(self.epistemic), xi, ia, ib


class TheoremTerms(NamedTuple):
    slack: float
    prob_sums: np.ndarray
    triple: np.ndarray
    pairwise: np.ndarray

    @property
    def measurement_bound_gap(self) -> float:
        """min over pairs of (probability sum - triple overlap); >= 0 by theorem."""
        return float(np.min(self.prob_sums - self.triple)) if self.triple.size else 0.0

    @property
    def pairwise_bound_gap(self) -> float:
        """sum of triple overlaps - (sum of pairwise overlaps - 1); >= 0 by theorem."""
        return float(np.sum(self.triple) - (np.sum(self.pairwise) - 1.0))


def theorem_terms(model: FiniteOnticModel) -> TheoremTerms:
    mu, xi, ia, ib = model._arrays()
    prob, triple, pairwise = kernels.ontic_terms(mu, xi, ia, ib)
    slack = 1.0 + float(np.sum(prob)) - float(np.sum(pairwise))
    return TheoremTerms(slack, prob, triple, pairwise)


def model_probabilities(model: FiniteOnticModel) -> ProbabilityTable:
    """P(m_i | psi_{j_i}) = sum_l xi[i, l] mu_{j_i}(l)."""
    mu = model.epistemic
    entries = {}
    for (j1, j2), xi in model.responses.items():
        entries[(j1, j2)] = [xi[i] @ mu[j] for i, j in enumerate((0, j1, j2))]
    return ProbabilityTable(entries)


def model_inequality_slack(model: FiniteOnticModel) -> float:
    """1 + sum of model probabilities - sum_j omega_C(mu_0, mu_j); never negative."""
    return theorem_terms(model).slack


def kappa_values(model: FiniteOnticModel, scenario: Scenario) -> np.ndarray:
    """omega_C / omega_Q for each j = 1..n (inf where omega_Q = 0)."""
    mu = model.epistemic
    wc = np.array([classical_overlap(mu[0], mu[j]) for j in range(1, model.n + 1)])
    wq = np.array(scenario.overlaps)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(wq > 0, wc / np.where(wq > 0, wq, 1.0), np.inf)


def psi_ontic_embedding(scenario: Scenario, table: ProbabilityTable) -> FiniteOnticModel:
    """Model with one ontic state per preparation that reproduces ``table`` exactly.

    In ontic state j only the outcomes paired with psi_j matter. Outcome i
    gets ``table[(j1, j2)][i]`` there; the rest of the column goes to some
    other outcome so columns stay normalised. When j = 0 = j_0 only outcome 0
    is paired with lambda = 0, and so on.
    """
    if table.pairs != scenario.pairs:
        raise KeyMismatch(f"table keys {table.pairs} do not match scenario pairs {scenario.pairs}")
    n = scenario.n
    L = n + 1
    mu = np.eye(L)
    responses = {}
    for (j1, j2), probs in table.entries.items():
        xi = np.zeros((3, L))
        xi[0, :] = 1.0
        for i, j in enumerate((0, j1, j2)):
            p = float(np.clip(probs[i], 0.0, 1.0))
            other = 1 if i == 0 else 0
            xi[:, j] = 0.0
            xi[i, j] = p
            xi[other, j] = 1.0 - p
        responses[(j1, j2)] = xi
    return FiniteOnticModel(mu, responses)


def random_model(lambda_count: int, n: int, pairs: Iterable | None = None, seed: int = 0,
                 concentration: float = 1.0, adversarial: bool = False) -> FiniteOnticModel:
    """Random finite model, reproducible from ``seed``.

    Epistemic rows are Dirichlet(concentration) over the ontic states; small
    concentrations give sparse, nearly disjoint rows. Response columns are
    uniform on the outcome simplex, or with ``adversarial`` they answer the
    outcome whose preparation has the least weight at that ontic state, which
    minimises every probability sum and so the slack for the given rows.
    """
    if n < 3:
        raise BadN(f"n must be >= 3, got {n}")
    if lambda_count < 1:
        raise ValueError("lambda_count must be >= 1")
    if not concentration > 0:
        raise ValueError("concentration must be positive")
    pairs = [tuple(p) for p in pairs] if pairs is not None else pair_keys(n)
    rng = seeding.rng(seed, seeding.ORACLE)
    if lambda_count > 1:
        mu = rng.dirichlet(np.full(lambda_count, concentration), size=n + 1)
        mu = mu / mu.sum(axis=1, keepdims=True)
    else:
        mu = np.ones((n + 1, 1))
    responses = {}
    if adversarial:
        for j1, j2 in pairs:
            pick = np.argmin(mu[[0, j1, j2]], axis=0)
            responses[(j1, j2)] = (np.arange(3)[:, None] == pick[None, :]).astype(float)
    else:
        xi = rng.dirichlet(np.ones(3), size=(len(pairs), lambda_count))  # (P, L, 3)
        xi = xi / xi.sum(axis=2, keepdims=True)
        responses = {p: xi[k].T for k, p in enumerate(pairs)}
    return FiniteOnticModel(mu, responses)
