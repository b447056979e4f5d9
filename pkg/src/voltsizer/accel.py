"""Numba acceleration shim.

Hot kernels in ``_kernels`` are compiled with numba's @njit by default.
Setting the environment variable ``VOLTSIZER_DISABLE_NUMBA=1`` (or any of
"1", "true", "yes") before import selects the pure-Python/numpy fallback
path: the same functions run uncompiled, bit-identical, just slower.
``benchmarks/bench_kernels.py`` compares the two paths.
"""

import os

_TRUTHY = ("1", "true", "yes")


def _numba_wanted():
    flag = os.environ.get("VOLTSIZER_DISABLE_NUMBA", "").strip().lower()
    if flag in _TRUTHY:
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _numba_wanted()


def maybe_jit(func=None, **options):
    """@njit when acceleration is enabled, identity decorator otherwise.

    No fastmath: kernels must stay IEEE-reproducible so the fallback path
    and the compiled path produce bit-identical results.
    """
    def wrap(fn):
        if NUMBA_ENABLED:
            import numba
            return numba.njit(fn, cache=True, **options)
        return fn
    if func is not None:
        return wrap(func)
    return wrap


def python_impl(fn):
    """Return the uncompiled implementation of a (possibly jitted) kernel."""
    return getattr(fn, "py_func", fn)
