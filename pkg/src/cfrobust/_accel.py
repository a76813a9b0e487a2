"""Optional numba acceleration.

Hot kernels are written once in a numba-compatible subset of numpy and
wrapped with :func:`jit`.  Setting ``CFROBUST_DISABLE_NUMBA=1`` (or running
without numba installed) keeps the plain Python/numpy function.  The original
function is always reachable as ``kernel.py_func`` so both paths can be
benchmarked side by side.
"""

import os

_DISABLED = os.environ.get("CFROBUST_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    if _DISABLED:
        raise ImportError
    import numba
except ImportError:  # pragma: no cover - depends on environment
    numba = None

NUMBA_ENABLED = numba is not None


def jit(func):
    if numba is None:
        func.py_func = func
        return func
    return numba.njit(cache=True, nogil=True)(func)
