import json
from pathlib import Path

import numpy as np
import pytest

from psiepi import OptimizerOptions, optimize_scenario

ORACLES = json.loads((Path(__file__).parent / "oracles" / "frozen.json").read_text())

# restarts used for the reference-scale scenarios shared by several test modules
REFERENCE_RESTARTS = 64


@pytest.fixture(scope="session")
def oracles():
    return ORACLES


_cache = {}


def optimized(dim, n, restarts=REFERENCE_RESTARTS, seed=0):
    key = (dim, n, restarts, seed)
    if key not in _cache:
        _cache[key] = optimize_scenario(dim, n, OptimizerOptions(restarts=restarts, seed=seed))
    return _cache[key]


@pytest.fixture(scope="session")
def opt_d3n3():
    return optimized(3, 3)


@pytest.fixture(scope="session")
def opt_d3n5():
    return optimized(3, 5)


@pytest.fixture(scope="session")
def opt_d4n5():
    return optimized(4, 5)


def random_orthogonal(d, rng, complex_field=False):
    z = rng.standard_normal((d, d))
    if complex_field:
        z = z + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))
