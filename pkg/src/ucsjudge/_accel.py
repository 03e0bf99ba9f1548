"""Optional numba acceleration.

Set ``UCSJUDGE_DISABLE_NUMBA=1`` to force the pure-numpy kernels (also
used automatically when numba is not importable).
"""

import os

_DISABLED = os.environ.get("UCSJUDGE_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    if _DISABLED:
        raise ImportError
    import numba

    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise the identity decorator."""
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda func: func


def backend_name() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
