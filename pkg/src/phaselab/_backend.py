"""Pick the compiled kernels when available, otherwise the numpy fallback.

Set PHASELAB_PURE_PYTHON=1 to force the fallback.
"""
import os
import warnings

from . import _fallback

ACT_CODES = {"hermite4": _fallback.HERMITE4, "logcosh": _fallback.LOGCOSH}

compiled = None
if not os.environ.get("PHASELAB_PURE_PYTHON"):
    try:
        from . import _kernels as compiled
    except ImportError:  # pragma: no cover - depends on the build
        warnings.warn("phaselab._kernels is not built; using the slow pure-Python loops", RuntimeWarning)
        compiled = None

CYTHON_AVAILABLE = compiled is not None
NAME = "cython" if CYTHON_AVAILABLE else "python"


def kernels(prefer="auto"):
    """Return the kernel module for ``prefer`` in {"auto", "cython", "python"}."""
    if prefer == "python":
        return _fallback
    if prefer == "cython":
        if compiled is None:
            raise RuntimeError("compiled kernels are not available")
        return compiled
    if prefer != "auto":
        raise ValueError(f"unknown backend {prefer!r}")
    return compiled if compiled is not None else _fallback
