"""Numba switch for the hot kernels.

Set ``CHAINEX_DISABLE_NUMBA=1`` to run every kernel as plain Python over
numpy arrays. The same source is used by both paths.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

DISABLED = os.environ.get("CHAINEX_DISABLE_NUMBA", "").strip() not in ("", "0")
USING_NUMBA = numba is not None and not DISABLED


def _noop(*args, **kwargs):
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


if USING_NUMBA:
    def njit(*args, **kwargs):
        kwargs.setdefault("cache", True)
        if len(args) == 1 and callable(args[0]):
            return numba.njit(**kwargs)(args[0])
        return numba.njit(*args, **kwargs)
else:
    njit = _noop

__all__ = ["njit", "USING_NUMBA"]
