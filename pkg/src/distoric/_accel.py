"""Optional numba acceleration.

Set ``DISTORIC_NO_NUMBA=1`` in the environment to run every kernel as plain
Python/numpy. The flag is read once, at import time.
"""
import os

USE_NUMBA = os.environ.get("DISTORIC_NO_NUMBA", "0").strip().lower() not in ("1", "true", "yes")

if USE_NUMBA:
    try:
        import numba as nb
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when acceleration is on, identity decorator otherwise."""
    kwargs.setdefault("cache", True)
    if USE_NUMBA:
        return nb.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]):
        return args[0]

    def wrap(fn):
        return fn

    return wrap
