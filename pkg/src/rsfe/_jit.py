"""Numba dispatch for the hot kernels.

Set ``RSFE_DISABLE_NUMBA=1`` to run every kernel as plain Python/numpy. The
kernels consume pre-drawn random numbers, so both paths walk the same
trajectories; they agree up to libm rounding in ``exp``.
"""
import os

NUMBA_DISABLED = os.environ.get("RSFE_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    import numba as _numba
except ImportError:  # pragma: no cover
    _numba = None

USING_NUMBA = _numba is not None and not NUMBA_DISABLED


def njit(func=None, **kwargs):
    """``numba.njit(cache=True, nogil=True)`` or the identity, per ``USING_NUMBA``."""
    opts = {"cache": True, "nogil": True}
    opts.update(kwargs)

    def wrap(f):
        if not USING_NUMBA:
            return f
        return _numba.njit(**opts)(f)

    if func is None:
        return wrap
    return wrap(func)


def py_func(kernel):
    """Return the undecorated Python version of a kernel."""
    return getattr(kernel, "py_func", kernel)
