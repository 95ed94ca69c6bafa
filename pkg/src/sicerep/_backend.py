"""Backend selection for the hot numeric kernels.

The inner loops in ``_kernels`` are written once as plain Python over numpy
arrays.  When numba is importable they are compiled with ``@njit``; setting
``SICEREP_BACKEND=numpy`` in the environment forces the uncompiled numpy
path (useful for debugging and for the backend benchmark).
"""

import os

_requested = os.environ.get("SICEREP_BACKEND", "auto").strip().lower()

if _requested in ("numpy", "python", "nojit"):
    HAVE_NUMBA = False
elif _requested in ("auto", "", "numba"):
    try:
        import numba  # noqa: F401
        HAVE_NUMBA = True
    except ImportError:
        if _requested == "numba":
            raise
        HAVE_NUMBA = False
else:
    raise ValueError(
        f"SICEREP_BACKEND must be 'auto', 'numba' or 'numpy', got {_requested!r}")

BACKEND = "numba" if HAVE_NUMBA else "numpy"


def maybe_jit(func):
    """Compile ``func`` with numba when active, otherwise return it as-is."""
    if HAVE_NUMBA:
        from numba import njit
        return njit(cache=True)(func)
    return func
