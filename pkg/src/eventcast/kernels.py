"""Kernel selection.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``EVENTCAST_PURE_PYTHON`` is set to a non-empty value
other than ``0``, the pure-Python versions are used.
"""
import os

import numpy as np

from . import _pykernels

_force_pure = os.environ.get("EVENTCAST_PURE_PYTHON", "") not in ("", "0")
try:
    if _force_pure:
        raise ImportError("pure Python kernels requested")
    from . import _kernels as _impl

    COMPILED = True
except ImportError:
    _impl = _pykernels
    COMPILED = False

BACKEND = "cython" if COMPILED else "python"


def run_partitioned(table, symbols, parts, current, impl=None):
    impl = impl or _impl
    return impl.run_partitioned(
        np.ascontiguousarray(table, dtype=np.int32),
        np.ascontiguousarray(symbols, dtype=np.int32),
        np.ascontiguousarray(parts, dtype=np.int32),
        current,
    )


def first_hit(indptr, indices, probs, final, start, h, cutoff, impl=None):
    impl = impl or _impl
    return impl.first_hit(
        np.ascontiguousarray(indptr, dtype=np.int64),
        np.ascontiguousarray(indices, dtype=np.int32),
        np.ascontiguousarray(probs, dtype=np.float64),
        np.ascontiguousarray(final, dtype=np.uint8),
        int(start),
        int(h),
        float(cutoff),
    )


def implementations():
    """The available kernel modules, compiled first."""
    out = {}
    try:
        from . import _kernels

        out["cython"] = _kernels
    except ImportError:
        pass
    out["python"] = _pykernels
    return out
