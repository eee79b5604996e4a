# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernel sums over truncated cosine kernels.

Sources must be sorted by their first coordinate; each target only visits the
window of sources whose first coordinate lies within kappa*pi/2.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, sqrt, fabs, fmin, fmax, M_PI

cnp.import_array()


cdef inline Py_ssize_t _lower(const double[::1] keys, double v) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = keys.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if keys[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef inline Py_ssize_t _upper(const double[::1] keys, double v) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = keys.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if keys[mid] <= v:
            lo = mid + 1
        else:
            hi = mid
    return lo


def kernel_sums(const double[:, ::1] src, const double[::1] coef,
                const double[:, ::1] tgt, double kappa, bint grad):
    """values[k] = sum_i coef[i] Cos^2(|src_i - tgt_k| / kappa), plus d/dtgt."""
    cdef Py_ssize_t q = tgt.shape[0], d = tgt.shape[1], r = src.shape[0]
    cdef Py_ssize_t k, i, lo, hi
    cdef double radius = 0.5 * M_PI * kappa
    cdef double acc, g0, g1, dx0, dx1, dist, s, c, w
    cdef const double[::1] keys = np.ascontiguousarray(np.asarray(src[:, 0]))
    values = np.zeros(q, dtype=np.float64)
    grads = np.zeros((q, d), dtype=np.float64)
    cdef double[::1] vv = values
    cdef double[:, ::1] gv = grads
    with nogil:
        for k in range(q):
            lo = _lower(keys, tgt[k, 0] - radius)
            hi = _upper(keys, tgt[k, 0] + radius)
            acc = 0.0
            g0 = 0.0
            g1 = 0.0
            for i in range(lo, hi):
                dx0 = tgt[k, 0] - src[i, 0]
                if d == 2:
                    dx1 = tgt[k, 1] - src[i, 1]
                    dist = sqrt(dx0 * dx0 + dx1 * dx1)
                else:
                    dx1 = 0.0
                    dist = fabs(dx0)
                if dist >= radius:
                    continue
                s = dist / kappa
                c = cos(s)
                acc += coef[i] * c * c
                if grad and dist > 0.0:
                    w = -2.0 * coef[i] * c * sin(s) / (kappa * dist)
                    g0 += w * dx0
                    g1 += w * dx1
            vv[k] = acc
            if grad:
                gv[k, 0] = g0
                if d == 2:
                    gv[k, 1] = g1
    return values, grads


def cell_curvature(const double[:, ::1] src, const double[::1] coef,
                   const double[:, ::1] lo_corner, const double[:, ::1] hi_corner,
                   double kappa):
    """Upper bound on the largest Hessian eigenvalue of sum_i coef_i K(src_i, .)
    over each axis-aligned cell [lo_corner_k, hi_corner_k]; coef must be >= 0."""
    cdef Py_ssize_t q = lo_corner.shape[0], d = lo_corner.shape[1]
    cdef Py_ssize_t k, i, a, b, j
    cdef double radius = 0.5 * M_PI * kappa
    cdef double inv2 = 2.0 / (kappa * kappa)
    cdef double acc, dmin2, dmax2, t, dmin, e, u, tang, far
    cdef const double[::1] keys = np.ascontiguousarray(np.asarray(src[:, 0]))
    out = np.zeros(q, dtype=np.float64)
    cdef double[::1] ov = out
    with nogil:
        for k in range(q):
            a = _lower(keys, lo_corner[k, 0] - radius)
            b = _upper(keys, hi_corner[k, 0] + radius)
            acc = 0.0
            for i in range(a, b):
                dmin2 = 0.0
                dmax2 = 0.0
                for j in range(d):
                    t = src[i, j]
                    if t < lo_corner[k, j]:
                        dmin2 += (lo_corner[k, j] - t) * (lo_corner[k, j] - t)
                    elif t > hi_corner[k, j]:
                        dmin2 += (t - hi_corner[k, j]) * (t - hi_corner[k, j])
                    far = fmax(fabs(t - lo_corner[k, j]), fabs(t - hi_corner[k, j]))
                    dmax2 += far * far
                dmin = sqrt(dmin2)
                if dmin >= radius:
                    continue
                e = fmin(sqrt(dmax2), radius)
                u = -inv2 * cos(2.0 * e / kappa)
                if d == 2:
                    if e > 0.0:
                        tang = -sin(2.0 * e / kappa) / (kappa * e)
                    else:
                        tang = -inv2
                    u = fmax(u, tang)
                acc += coef[i] * u
            ov[k] = acc
    return out
