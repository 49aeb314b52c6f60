"""Numba toggle.

Kernels in :mod:`himm.kernels` are written against plain numpy arrays and
decorated with :func:`njit`. When numba is importable and the environment
variable ``HIMM_DISABLE_NUMBA`` is unset (or ``0``), they are compiled;
otherwise the undecorated Python functions run as-is.
"""

import os

_FLAG = os.environ.get("HIMM_DISABLE_NUMBA", "0").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and _FLAG in ("", "0", "false", "no")


def njit(fn):
    if USE_NUMBA:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
