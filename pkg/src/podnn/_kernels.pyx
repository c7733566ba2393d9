# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stencil-weight kernels.

One fused pass per interior node: build the local IMQ collocation matrix,
evaluate the operator applied to the basis at the center, and solve with
LAPACK dgesv.  This is the hot loop of snapshot and data-set generation.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt
from scipy.linalg.cython_lapack cimport dgesv

cnp.import_array()

COMPILED = True


def imq_matrix(points, double shape):
    """Pairwise inverse-multiquadric matrix phi(shape*||xi - xj||)."""
    cdef double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t n = pts.shape[0], i, j
    cdef double dx, dy, e2 = shape * shape
    out_arr = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    for i in range(n):
        out[i, i] = 1.0
        for j in range(i + 1, n):
            dx = pts[i, 0] - pts[j, 0]
            dy = pts[i, 1] - pts[j, 1]
            out[i, j] = 1.0 / sqrt(1.0 + e2 * (dx * dx + dy * dy))
            out[j, i] = out[i, j]
    return out_arr


cdef inline int _local_solve(double[:, ::1] pts, long[:, ::1] st, Py_ssize_t row,
                             double shape, double mu1, double mu2, int components,
                             double* a, double* rhs, int* ipiv) noexcept nogil:
    """Fill the local system for one stencil and solve in place.

    With components == 0 the single right-hand side is the mu-blended operator
    row; otherwise two right-hand sides (the -dxx and -dyy parts) are solved.
    Returns the LAPACK info code.
    """
    cdef int k = <int> st.shape[1]
    cdef int nrhs = 2 if components else 1
    cdef int info = 0
    cdef Py_ssize_t j, q
    cdef long gj, gq
    cdef double dx, dy, r2, s, s12, s32, s52, bxx, byy
    cdef double e2 = shape * shape
    cdef double e4 = e2 * e2
    cdef double cx = pts[st[row, 0], 0]
    cdef double cy = pts[st[row, 0], 1]

    for j in range(k):
        gj = st[row, j]
        for q in range(j, k):
            gq = st[row, q]
            dx = pts[gj, 0] - pts[gq, 0]
            dy = pts[gj, 1] - pts[gq, 1]
            r2 = dx * dx + dy * dy
            # column-major symmetric fill
            a[j + k * q] = 1.0 / sqrt(1.0 + e2 * r2)
            a[q + k * j] = a[j + k * q]
        dx = cx - pts[gj, 0]
        dy = cy - pts[gj, 1]
        s = 1.0 + e2 * (dx * dx + dy * dy)
        s12 = 1.0 / sqrt(s)
        s32 = s12 / s
        s52 = s32 / s
        bxx = e2 * s32 - 3.0 * e4 * dx * dx * s52
        byy = e2 * s32 - 3.0 * e4 * dy * dy * s52
        if components:
            rhs[j] = bxx
            rhs[j + k] = byy
        else:
            rhs[j] = bxx + mu1 * byy - mu2 * s12
    dgesv(&k, &nrhs, a, &k, ipiv, rhs, &k, &info)
    return info


def helmholtz_weights(points, stencils, double shape, double mu1, double mu2):
    """Stencil weights of (-dxx - mu1*dyy - mu2) for every interior node."""
    cdef double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef long[:, ::1] st = np.ascontiguousarray(stencils, dtype=np.int64)
    cdef Py_ssize_t m = st.shape[0], k = st.shape[1], i
    out_arr = np.empty((m, k), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    a_arr = np.empty(k * k, dtype=np.float64)
    ipiv_arr = np.empty(k, dtype=np.intc)
    cdef double[::1] a = a_arr
    cdef int[::1] ipiv = ipiv_arr
    cdef int info = 0
    cdef Py_ssize_t bad = -1
    with nogil:
        for i in range(m):
            info = _local_solve(pts, st, i, shape, mu1, mu2, 0, &a[0], &out[i, 0], &ipiv[0])
            if info != 0:
                bad = i
                break
    if bad >= 0:
        raise np.linalg.LinAlgError(f"singular local system at interior node {bad} (info={info})")
    return out_arr


def helmholtz_weight_components(points, stencils, double shape):
    """Mu-independent weight components (w_xx, w_yy) for the affine split."""
    cdef double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef long[:, ::1] st = np.ascontiguousarray(stencils, dtype=np.int64)
    cdef Py_ssize_t m = st.shape[0], k = st.shape[1], i, j
    wxx_arr = np.empty((m, k), dtype=np.float64)
    wyy_arr = np.empty((m, k), dtype=np.float64)
    cdef double[:, ::1] wxx = wxx_arr
    cdef double[:, ::1] wyy = wyy_arr
    a_arr = np.empty(k * k, dtype=np.float64)
    rhs_arr = np.empty(2 * k, dtype=np.float64)
    ipiv_arr = np.empty(k, dtype=np.intc)
    cdef double[::1] a = a_arr
    cdef double[::1] rhs = rhs_arr
    cdef int[::1] ipiv = ipiv_arr
    cdef int info = 0
    cdef Py_ssize_t bad = -1
    with nogil:
        for i in range(m):
            info = _local_solve(pts, st, i, shape, 0.0, 0.0, 1, &a[0], &rhs[0], &ipiv[0])
            if info != 0:
                bad = i
                break
            for j in range(k):
                wxx[i, j] = rhs[j]
                wyy[i, j] = rhs[j + k]
    if bad >= 0:
        raise np.linalg.LinAlgError(f"singular local system at interior node {bad} (info={info})")
    return wxx_arr, wyy_arr
