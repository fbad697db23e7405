"""Backend selection for the per-triangle kernels.

The compiled extension is used when it imports; otherwise the numpy
versions are used.  Setting ``STADIUM_LAB_BACKEND=python`` forces the
fallback.
"""

import os

import numpy as np

from . import _kernels_py

if os.environ.get("STADIUM_LAB_BACKEND", "").lower() == "python":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
        BACKEND = "python"


def _prep(xy, tri):
    return (np.ascontiguousarray(xy, dtype=np.float64),
            np.ascontiguousarray(tri, dtype=np.int64))


def p1_forms(xy, tri, backend=None):
    impl = _pick(backend)
    return impl.p1_forms(*_prep(xy, tri))


def weighted_mass(xy, tri, wq, backend=None):
    impl = _pick(backend)
    return impl.weighted_mass(*_prep(xy, tri), np.ascontiguousarray(wq, dtype=np.float64))


def p1_gradients(xy, tri, u, backend=None):
    impl = _pick(backend)
    return impl.p1_gradients(*_prep(xy, tri), np.ascontiguousarray(u, dtype=np.float64))


def _pick(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _kernels_py
    if backend == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {backend!r}")
