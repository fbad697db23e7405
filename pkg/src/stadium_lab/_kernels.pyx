# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-triangle P1 kernels.

Every element writes only its own output rows, so the parallel loops give
bit-identical results for any thread count.
"""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange

cnp.import_array()

# barycentric coordinates of the 3-point interior rule (degree 2)
cdef double QA = 2.0 / 3.0
cdef double QB = 1.0 / 6.0


cdef inline void _stiff_row(double[:, ::1] ke, Py_ssize_t e, double t,
                            double bx0, double by0, double bx1, double by1,
                            double bx2, double by2) noexcept nogil:
    cdef double d = 4.0 * t
    if t == 0.0:
        d = 1.0
        bx0 = by0 = bx1 = by1 = bx2 = by2 = 0.0
    ke[e, 0] = (bx0 * bx0 + by0 * by0) / d
    ke[e, 1] = (bx0 * bx1 + by0 * by1) / d
    ke[e, 2] = (bx0 * bx2 + by0 * by2) / d
    ke[e, 3] = ke[e, 1]
    ke[e, 4] = (bx1 * bx1 + by1 * by1) / d
    ke[e, 5] = (bx1 * bx2 + by1 * by2) / d
    ke[e, 6] = ke[e, 2]
    ke[e, 7] = ke[e, 5]
    ke[e, 8] = (bx2 * bx2 + by2 * by2) / d


def p1_forms(const double[:, ::1] xy, const cnp.int64_t[:, ::1] tri):
    """Local stiffness and mass matrices, flattened row-major, and element areas."""
    cdef Py_ssize_t nt = tri.shape[0]
    ke_arr = np.empty((nt, 9), dtype=np.float64)
    me_arr = np.empty((nt, 9), dtype=np.float64)
    area_arr = np.empty(nt, dtype=np.float64)
    cdef double[:, ::1] ke = ke_arr
    cdef double[:, ::1] me = me_arr
    cdef double[::1] area = area_arr
    cdef Py_ssize_t e
    cdef double x0, y0, x1, y1, x2, y2, t, s
    for e in prange(nt, nogil=True, schedule="static"):
        x0 = xy[tri[e, 0], 0]
        y0 = xy[tri[e, 0], 1]
        x1 = xy[tri[e, 1], 0]
        y1 = xy[tri[e, 1], 1]
        x2 = xy[tri[e, 2], 0]
        y2 = xy[tri[e, 2], 1]
        t = 0.5 * ((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0))
        area[e] = t
        # grad(phi_i) = (by_i, bx_i) / (2t) with (bx_i, by_i) built from the opposite edge
        _stiff_row(ke, e, t, x2 - x1, y1 - y2, x0 - x2, y2 - y0, x1 - x0, y0 - y1)
        s = t / 12.0
        me[e, 0] = 2.0 * s
        me[e, 1] = s
        me[e, 2] = s
        me[e, 3] = s
        me[e, 4] = 2.0 * s
        me[e, 5] = s
        me[e, 6] = s
        me[e, 7] = s
        me[e, 8] = 2.0 * s
    return ke_arr, me_arr, area_arr


cdef inline double _bary(int q, int i) noexcept nogil:
    if q == i:
        return QA
    return QB


def weighted_mass(const double[:, ::1] xy, const cnp.int64_t[:, ::1] tri,
                  const double[:, ::1] wq):
    """Local forms of int weight*u*v with the weight sampled at the 3 rule points."""
    cdef Py_ssize_t nt = tri.shape[0]
    out_arr = np.empty((nt, 9), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t e
    cdef int i, j, q
    cdef double t, acc
    for e in prange(nt, nogil=True, schedule="static"):
        t = 0.5 * ((xy[tri[e, 1], 0] - xy[tri[e, 0], 0]) * (xy[tri[e, 2], 1] - xy[tri[e, 0], 1])
                   - (xy[tri[e, 2], 0] - xy[tri[e, 0], 0]) * (xy[tri[e, 1], 1] - xy[tri[e, 0], 1]))
        for i in range(3):
            for j in range(3):
                acc = 0.0
                for q in range(3):
                    acc = acc + wq[e, q] * _bary(q, i) * _bary(q, j)
                out[e, 3 * i + j] = acc * t / 3.0
    return out_arr


def p1_gradients(const double[:, ::1] xy, const cnp.int64_t[:, ::1] tri, const double[::1] u):
    """Constant gradient of the P1 interpolant of nodal values ``u`` on each triangle."""
    cdef Py_ssize_t nt = tri.shape[0]
    g_arr = np.empty((nt, 2), dtype=np.float64)
    cdef double[:, ::1] g = g_arr
    cdef Py_ssize_t e
    cdef double x0, y0, x1, y1, x2, y2, t2, u0, u1, u2
    for e in prange(nt, nogil=True, schedule="static"):
        x0 = xy[tri[e, 0], 0]
        y0 = xy[tri[e, 0], 1]
        x1 = xy[tri[e, 1], 0]
        y1 = xy[tri[e, 1], 1]
        x2 = xy[tri[e, 2], 0]
        y2 = xy[tri[e, 2], 1]
        u0 = u[tri[e, 0]]
        u1 = u[tri[e, 1]]
        u2 = u[tri[e, 2]]
        t2 = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        g[e, 0] = (u0 * (y1 - y2) + u1 * (y2 - y0) + u2 * (y0 - y1)) / t2
        g[e, 1] = (u0 * (x2 - x1) + u1 * (x0 - x2) + u2 * (x1 - x0)) / t2
    return g_arr
