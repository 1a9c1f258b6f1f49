"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the pure-Python
module is loaded.  Setting ``OGSCHED_PURE_PYTHON=1`` forces the fallback.
"""

import os

import numpy as np

from . import _kernels_py

if os.environ.get("OGSCHED_PURE_PYTHON"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = "python" if _impl is _kernels_py else "compiled"


def subset_dp(prev, table, mode: str):
    code = {"sum": 0, "max": 1}[mode]
    return _impl.subset_dp(np.ascontiguousarray(prev, dtype=np.float64),
                           np.ascontiguousarray(table, dtype=np.float64), code)


def cover_table(masks, costs):
    return _impl.cover_table(np.ascontiguousarray(masks, dtype=np.uint64),
                             np.ascontiguousarray(costs, dtype=np.float64))
