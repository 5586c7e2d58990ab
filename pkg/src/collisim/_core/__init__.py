"""Hot kernels with a compiled implementation and a pure-Python fallback.

The compiled module is used when importable. Setting ``COLLISIM_PURE_PYTHON=1``
forces the fallback (used by the tests and the benchmark to compare both).
"""
import os

from . import _fallback

fallback = _fallback
compiled = None

if not os.environ.get("COLLISIM_PURE_PYTHON"):
    try:
        from . import _ext as compiled
    except ImportError:  # extension not built
        compiled = None

_impl = compiled if compiled is not None else _fallback
BACKEND = "cython" if compiled is not None else "python"

kraus_apply = _impl.kraus_apply
hessenberg_schur = _impl.hessenberg_schur

__all__ = ["BACKEND", "compiled", "fallback", "hessenberg_schur", "kraus_apply"]
