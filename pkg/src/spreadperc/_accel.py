"""Backend selection for the hot kernels.

Set ``SPREADPERC_BACKEND=numpy`` to bypass numba and run the vectorised
numpy/scipy fallbacks instead.  ``SPREADPERC_NUM_THREADS`` sets the number of
worker threads used for replicate batches (default 1).
"""

import os
from concurrent.futures import ThreadPoolExecutor

from .errors import InvalidConfigError

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

BACKENDS = ("numba", "numpy")


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity otherwise."""
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        kwargs.setdefault("nogil", True)
        return numba.njit(*args, **kwargs)

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


def get_backend(backend=None):
    """Resolve an explicit backend name or fall back to the environment."""
    if backend is None:
        backend = os.environ.get("SPREADPERC_BACKEND", "numba").strip().lower()
    if backend not in BACKENDS:
        raise InvalidConfigError(f"unknown backend {backend!r}; expected one of {BACKENDS}")
    if backend == "numba" and not HAVE_NUMBA:
        return "numpy"
    return backend


def num_threads():
    raw = os.environ.get("SPREADPERC_NUM_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise InvalidConfigError(f"SPREADPERC_NUM_THREADS must be an integer, got {raw!r}")
    return max(1, n)


def parallel_map(fn, items):
    """Ordered map over ``items``; threads only pay off for nogil kernels."""
    items = list(items)
    n = num_threads()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
