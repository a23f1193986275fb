"""Hot-loop kernels with a compiled core and a numpy fallback.

The Cython extension ``brouwerkit._ckernels`` is used when it was built;
otherwise (or when ``BROUWERKIT_PURE=1`` is set) the numpy versions in
``brouwerkit._pykernels`` are used.  ``BACKEND`` names the active one.
"""
import os

from . import _pykernels

try:
    if os.environ.get("BROUWERKIT_PURE", "") not in ("", "0"):
        raise ImportError("pure backend requested")
    from . import _ckernels as _impl
    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "numpy"

winding_numbers = _impl.winding_numbers
polyline_distance = _impl.polyline_distance
farthest_pair = _impl.farthest_pair

__all__ = ["BACKEND", "winding_numbers", "polyline_distance", "farthest_pair"]
