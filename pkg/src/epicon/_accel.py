"""Backend switch for the numeric kernels.

Kernels are written once in a numba-compatible numpy subset.  When numba is
importable and ``EPICON_BACKEND`` is not ``numpy`` they are compiled with
``numba.njit``; otherwise the same functions run as plain numpy code.
"""

import os

_requested = os.environ.get("EPICON_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"EPICON_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

try:
    if _requested == "numpy":
        raise ImportError
    from numba import njit as _njit
    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

BACKEND = "numba" if HAS_NUMBA else "numpy"


def kernel(func=None, *, inline=False):
    """Compile ``func`` with numba when the numba backend is active.

    ``inline=True`` is for small helpers called from inside other kernels.
    """
    if func is None:
        return lambda f: kernel(f, inline=inline)
    if HAS_NUMBA:
        opts = {"cache": True, "nogil": True}
        if inline:
            opts["inline"] = "always"
        return _njit(**opts)(func)
    return func
