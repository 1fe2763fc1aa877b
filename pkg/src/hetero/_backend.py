"""Numba/numpy backend selection for the hot kernels.

The environment variable ``HETERO_BACKEND`` picks the implementation:

* ``numba`` (default when numba imports) -- @njit-compiled scalar loops;
* ``numpy`` -- pure numpy/python fallback, same arithmetic, same results.

Both paths execute identical float64 operation sequences, so trajectories
are bitwise identical across backends.
"""

import os

_requested = os.environ.get("HETERO_BACKEND", "").strip().lower()

if _requested not in ("", "numba", "numpy"):
    raise ValueError(f"HETERO_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

if _requested == "numpy":
    NUMBA_ENABLED = False
else:
    try:
        import numba  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:
        if _requested == "numba":
            raise
        NUMBA_ENABLED = False

BACKEND = "numba" if NUMBA_ENABLED else "numpy"


def threads() -> int:
    """Worker cap from HETERO_THREADS (>=1); defaults to 1."""
    raw = os.environ.get("HETERO_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"HETERO_THREADS must be an integer, got {raw!r}")
    return max(1, value)
