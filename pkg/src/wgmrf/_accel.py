"""Optional numba acceleration.

Kernels in :mod:`wgmrf._kernels` are written once as plain Python loops and
compiled with ``numba.njit`` when numba is importable.  Setting the
environment variable ``WGMRF_DISABLE_JIT=1`` selects the pure numpy/scipy
fallback paths instead.  ``WGMRF_THREADS`` caps numba's thread pool.
"""
import os

_FALSY = {"", "0", "false", "no", "off"}


def _env_flag(name):
    return os.environ.get(name, "").strip().lower() not in _FALSY


try:
    import numba

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    NUMBA_AVAILABLE = False

USE_JIT = NUMBA_AVAILABLE and not _env_flag("WGMRF_DISABLE_JIT")

if NUMBA_AVAILABLE:
    _threads = os.environ.get("WGMRF_THREADS", "").strip()
    if _threads:
        try:
            numba.set_num_threads(max(1, min(int(_threads), numba.config.NUMBA_NUM_THREADS)))
        except ValueError:
            pass


def jit(func):
    """Compile ``func`` with numba if available, otherwise return it unchanged.

    The compiled version is always built when numba is installed so that the
    benchmark can compare both paths; :data:`USE_JIT` only decides which one
    the library dispatches to.
    """
    if not NUMBA_AVAILABLE:
        return func
    return numba.njit(cache=True, nogil=True)(func)


def backend_name():
    return "numba" if USE_JIT else "numpy"
