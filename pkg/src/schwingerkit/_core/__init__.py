"""Hot kernels: Gauss-law enumeration and translation-orbit reduction.

The Cython extension is used when it has been built; otherwise the
numpy fallback in :mod:`._fallback` is selected. Setting the variable
``SCHWINGERKIT_PURE_PYTHON=1`` forces the fallback, which is handy for
benchmarking and for checking that both paths agree.
"""
import logging
import os

from . import _fallback

logger = logging.getLogger(__name__)

if os.environ.get("SCHWINGERKIT_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        logger.info("compiled kernels unavailable; using numpy fallback")
        _impl = _fallback
        BACKEND = "python"

enumerate_states = _impl.enumerate_states
orbit_reduce = _impl.orbit_reduce

__all__ = ["BACKEND", "enumerate_states", "orbit_reduce"]
