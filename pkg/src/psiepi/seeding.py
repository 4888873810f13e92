"""Named random substreams derived from one 64-bit seed."""
import os

import numpy as np

SCENARIO = 0
OPTIMIZER = 1
NOISE = 2
COUNTS = 3
BOOTSTRAP = 4
ORACLE = 5
TRIPLE = 6

SEED_ENV = "WORKBENCH_SEED"
_MASK = (1 << 64) - 1


def rng(seed: int, stream: int, *keys: int) -> np.random.Generator:
    """Generator for ``(seed, stream, *keys)``; independent of call order."""
    ss = np.random.SeedSequence(int(seed) & _MASK, spawn_key=(stream, *map(int, keys)))
    return np.random.default_rng(ss)


def derive_seed(seed: int, stream: int, *keys: int) -> int:
    """A child 64-bit seed, for handing to functions that take a seed."""
    ss = np.random.SeedSequence(int(seed) & _MASK, spawn_key=(stream, *map(int, keys)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def resolve_seed(flag_value, default: int = 0) -> int:
    """Flag wins over the environment variable, which wins over ``default``."""
    if flag_value is not None:
        return int(flag_value)
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        return int(env, 0)
    return default
