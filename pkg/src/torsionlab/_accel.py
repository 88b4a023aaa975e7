"""Numba switch.

Set ``TORSIONLAB_DISABLE_NUMBA=1`` before import to run every kernel on the
pure-numpy path. Kernels decorated with :func:`jit` keep the undecorated
function reachable as ``.py_func`` in both modes.
"""
import os
import warnings

_DISABLED = os.environ.get("TORSIONLAB_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("disabled by TORSIONLAB_DISABLE_NUMBA")
    import numba

    USE_NUMBA = True
except ImportError as exc:  # pragma: no cover - depends on environment
    numba = None
    USE_NUMBA = False
    if not _DISABLED:
        warnings.warn(f"numba unavailable ({exc}); using pure-numpy kernels")


def jit(func):
    if USE_NUMBA:
        return numba.njit(cache=True)(func)
    func.py_func = func
    return func
