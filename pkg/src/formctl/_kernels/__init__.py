"""Kernel backend selection: compiled extension if built, numpy otherwise.

Set FORMCTL_PURE=1 to force the pure-numpy path (used by the benchmark and
for debugging).
"""

import os

from . import numpy_backend

if os.environ.get("FORMCTL_PURE"):
    _impl = numpy_backend
else:
    try:
        from . import _speedups as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = numpy_backend

BACKEND = _impl.BACKEND
controller_fields = _impl.controller_fields
# fused RK4 stepper; None means the simulator uses its Python reference loop
rk4_chunk = getattr(_impl, "rk4_chunk", None)
