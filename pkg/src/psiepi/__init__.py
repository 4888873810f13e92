"""Compute, optimise, simulate and brute-force check the psi-epistemic overlap inequality."""
from .errors import *  # noqa: F401,F403
from .files import ResultRow, load_scenario, loads_scenario, dumps_scenario, save_scenario
from .inequality import (
    ProbabilityTable,
    Scenario,
    ScoreReport,
    born_table,
    efficiency_threshold,
    noise_robustness,
    pair_keys,
    s_eta,
    s_value,
)
from .kernels import BACKEND
from .ontic import (
    FiniteOnticModel,
    classical_overlap,
    kappa_values,
    model_inequality_slack,
    model_probabilities,
    psi_ontic_embedding,
    random_model,
    theorem_terms,
    triple_overlap,
)
from .optimizer import (
    OptimizationResult,
    OptimizerOptions,
    basis_baseline,
    optimize_measurement_for_triple,
    optimize_scenario,
    random_scenario,
    reoptimize,
)
from .quantum import (
    Effect,
    Measurement,
    PureState,
    born_probability,
    fidelity,
    make_state,
    quantum_overlap,
    validate_measurement,
)
from .simulation import CountRecord, NoiseModel, SEstimate, estimate_s, perturb_table, simulate_counts

__version__ = "0.1.0"
