"""Backend switch for the compiled kernels.

Set ``KDEBO_NUMBA=0`` in the environment to force the pure-numpy path.
The flag is read once at import time.
"""

import os

_flag = os.environ.get("KDEBO_NUMBA", "1").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and _flag not in ("0", "false", "no", "off")


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, identity decorator otherwise."""
    if USE_NUMBA:
        return numba.njit(*args, cache=True, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn
