"""Kernel backend selection.

The message-passing sweeps are plain scalar/numpy code that numba can
compile.  ``CROWDTEST_BACKEND=numpy`` forces the interpreted numpy path
(useful for debugging and as a reference in the benchmark); anything else
uses numba when it is importable and falls back silently otherwise.
"""

import os

_requested = os.environ.get("CROWDTEST_BACKEND", "numba").strip().lower()

if _requested not in ("numba", "numpy"):
    raise ValueError(
        f"CROWDTEST_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

if _requested == "numba":
    try:
        from numba import njit as _njit

        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba is a declared dependency
        BACKEND = "numpy"
else:
    BACKEND = "numpy"


def jit(func):
    """Compile ``func`` with numba on the numba backend; identity otherwise."""
    if BACKEND == "numba":
        return _njit(cache=True)(func)
    return func
