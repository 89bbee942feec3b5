"""Hot-kernel dispatch: compiled Cython core when available, numpy fallback otherwise.

Set ``AERIALTERRAIN_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"

if os.environ.get("AERIALTERRAIN_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
else:
    _impl = _kernels_py

bilinear_sample = _impl.bilinear_sample
dijkstra_grid = _impl.dijkstra_grid

__all__ = ["BACKEND", "bilinear_sample", "dijkstra_grid"]
