"""Hot kernels: compiled Cython core with a NumPy fallback.

The compiled module is used when it imports cleanly, unless the environment
variable ``CHIPLETPLAN_PURE_PYTHON`` is set to a non-empty value other than
``0``. ``BACKEND`` reports which implementation is active.
"""
import os

from . import _pykernels as python

compiled = None
if os.environ.get("CHIPLETPLAN_PURE_PYTHON", "") in ("", "0"):
    try:
        from . import _ckernels as compiled
    except ImportError:  # extension not built
        compiled = None

_impl = compiled if compiled is not None else python
BACKEND = "cython" if compiled is not None else "python"

anchor_mask = _impl.anchor_mask
rasterize = _impl.rasterize
bilinear = _impl.bilinear
mutual_rises = _impl.mutual_rises
anchored_rises = _impl.anchored_rises
adam_update = _impl.adam_update

__all__ = ["BACKEND", "anchor_mask", "rasterize", "bilinear", "mutual_rises", "anchored_rises", "adam_update",
           "python", "compiled"]
