"""Numba dispatch shim.

Hot kernels in :mod:`csmri.kernels` are compiled with numba when it is
available. Set the environment variable ``CSMRI_DISABLE_NUMBA=1`` before
import to force the pure-numpy fallback path (useful for debugging and for
benchmarking the two paths against each other).
"""

import os

try:
    from numba import njit as _numba_njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only on numba-free installs
    _numba_njit = None
    _HAVE_NUMBA = False

_DISABLED = os.environ.get("CSMRI_DISABLE_NUMBA", "").strip().lower() in (
    "1",
    "true",
    "yes",
)

NUMBA_ENABLED = _HAVE_NUMBA and not _DISABLED


def njit(func=None, **kwargs):
    """`numba.njit` when enabled, identity decorator otherwise."""
    if NUMBA_ENABLED:
        if func is None:
            return _numba_njit(**kwargs)
        return _numba_njit(func)
    if func is None:
        return lambda f: f
    return func
