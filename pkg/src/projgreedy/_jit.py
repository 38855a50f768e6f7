"""JIT shim.

Kernels are written in the numba-compatible subset of numpy. Setting the
environment variable ``PROJGREEDY_DISABLE_JIT=1`` (or running without numba
installed) leaves them as plain Python functions, which is the pure-numpy
reference path used by the backend benchmark and the cross-backend tests.
"""

import os

_FLAG = "PROJGREEDY_DISABLE_JIT"


def _env_disabled():
    return os.environ.get(_FLAG, "").strip().lower() not in ("", "0", "false", "no")


try:
    if _env_disabled():
        raise ImportError
    import numba as _numba
except ImportError:
    _numba = None

JIT_ENABLED = _numba is not None
BACKEND = "numba" if JIT_ENABLED else "numpy"


def njit(func):
    """Compile ``func`` in nopython mode when the JIT backend is active."""
    if _numba is None:
        return func
    return _numba.njit(cache=True, nogil=True)(func)


def py_func(func):
    """Return the uncompiled Python body of a kernel."""
    return getattr(func, "py_func", func)
