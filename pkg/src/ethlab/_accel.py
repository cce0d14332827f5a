"""Optional numba acceleration.

Numba is used when importable unless ``ETHLAB_DISABLE_NUMBA`` is set to a
non-empty value other than ``0``, in which case the pure-numpy twins in
:mod:`ethlab.kernels` are bound instead.  Both implementations are always
importable individually so they can be benchmarked against each other.
"""

import os

DISABLED = os.environ.get("ETHLAB_DISABLE_NUMBA", "").strip() not in ("", "0")

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is an install-time dependency
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        # Transparent decorator so jitted twins stay importable without numba.
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


USE_NUMBA = HAS_NUMBA and not DISABLED


def backend() -> str:
    """Name of the kernel backend selected at import time."""
    return "numba" if USE_NUMBA else "numpy"
