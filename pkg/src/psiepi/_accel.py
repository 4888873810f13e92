"""Numba switch.

Kernels in :mod:`psiepi.kernels` come in two flavours: a loop-based version
compiled with ``numba.njit`` and a vectorised pure-numpy version. Set
``PSIEPI_DISABLE_NUMBA=1`` to force the numpy path (also used automatically
when numba cannot be imported).
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

_DISABLED_VALUES = {"1", "true", "yes", "on"}

NUMBA_AVAILABLE = numba is not None
USE_NUMBA = NUMBA_AVAILABLE and (
    os.environ.get("PSIEPI_DISABLE_NUMBA", "").strip().lower() not in _DISABLED_VALUES
)


def njit(func):
    """``numba.njit(cache=True)`` when numba is importable, identity otherwise."""
    if numba is None:  # pragma: no cover
        return func
    return numba.njit(cache=True)(func)
