# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numerical kernels.

Same contracts as ``hdqkd._pykernels``; see there for the maths.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, acos, cos, fmax, fmin, INFINITY, M_PI

cnp.import_array()


def jacobi_eigh(a_in, double tol=1e-12, int max_sweeps=100):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a = np.array(a_in, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t n = a.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] v = np.eye(n)
    cdef double[:, ::1] A = a
    cdef double[:, ::1] V = v
    cdef Py_ssize_t p, q, k
    cdef double norm = 0.0, off, apq, theta, t, c, s, x, y
    cdef int sweeps = 0
    if n < 2:
        return a.diagonal().copy(), v, 0
    for p in range(n):
        for q in range(n):
            norm += A[p, q] * A[p, q]
    norm = sqrt(norm)
    while sweeps < max_sweeps:
        off = 0.0
        for p in range(n):
            for q in range(n):
                if p != q:
                    off += A[p, q] * A[p, q]
        if not sqrt(off) > tol * norm:
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    x = A[k, p]
                    y = A[k, q]
                    A[k, p] = c * x - s * y
                    A[k, q] = s * x + c * y
                for k in range(n):
                    x = A[p, k]
                    y = A[q, k]
                    A[p, k] = c * x - s * y
                    A[q, k] = s * x + c * y
                A[p, q] = 0.0
                A[q, p] = 0.0
                for k in range(n):
                    x = V[k, p]
                    y = V[k, q]
                    V[k, p] = c * x - s * y
                    V[k, q] = s * x + c * y
    return a.diagonal().copy(), v, sweeps


def secular_max_root(mu_in, weights_in, int max_iter=200):
    cdef double[::1] mu = np.ascontiguousarray(mu_in, dtype=np.float64)
    cdef double[:, ::1] w = np.ascontiguousarray(np.atleast_2d(weights_in), dtype=np.float64)
    cdef Py_ssize_t m = mu.shape[0], rows = w.shape[0], r, i
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(rows)
    cdef double top = -INFINITY, lo, hi, mid, f, total, eps = np.finfo(float).eps
    cdef bint pole
    cdef int it
    for i in range(m):
        top = fmax(top, mu[i])
    for r in range(rows):
        total = 0.0
        pole = False
        f = 0.0
        for i in range(m):
            total += w[r, i]
            if mu[i] == top:
                if w[r, i] > 0.0:
                    pole = True
            else:
                f += w[r, i] / (top - mu[i])
        lo = top
        hi = top + total
        if not pole and f - 1.0 <= 0.0:
            out[r] = top
            continue
        for it in range(max_iter):
            if hi - lo <= 4.0 * eps * fmax(fabs(hi), 1.0):
                break
            mid = 0.5 * (lo + hi)
            f = 0.0
            for i in range(m):
                f += w[r, i] / (mid - mu[i])
            if f - 1.0 > 0.0:
                lo = mid
            else:
                hi = mid
        out[r] = hi
    return out


cdef inline double _clip1(double x) nogil:
    if x != x:
        return 0.0
    return fmin(1.0, fmax(-1.0, x))


cdef double COS_PAD = 4.0 * 2.220446049250313e-16


cdef inline double _angle_pad(double c):
    return COS_PAD / sqrt(fmax(1.0 - c * c, COS_PAD))


def completion_pass(lo_in, hi_in, avail_in, known_in, diag_in,
                    double pivot_tol=1e-14, double empty_tol=1e-10):
    cdef double[:, ::1] lo = np.ascontiguousarray(lo_in, dtype=np.float64)
    cdef double[:, ::1] hi = np.ascontiguousarray(hi_in, dtype=np.float64)
    cdef cnp.uint8_t[:, ::1] avail = np.ascontiguousarray(avail_in, dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] known = np.ascontiguousarray(known_in, dtype=np.uint8)
    cdef double[::1] diag = np.ascontiguousarray(diag_in, dtype=np.float64)
    cdef Py_ssize_t n = lo.shape[0], j, l, k
    cdef cnp.ndarray[cnp.float64_t, ndim=2] new_lo_arr = np.array(lo, copy=True)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] new_hi_arr = np.array(hi, copy=True)
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] new_av_arr = np.array(avail, copy=True)
    cdef double[:, ::1] nlo = new_lo_arr
    cdef double[:, ::1] nhi = new_hi_arr
    cdef cnp.uint8_t[:, ::1] nav = new_av_arr
    cdef double[:, ::1] amin = np.empty((n, n))
    cdef double[:, ::1] amax = np.empty((n, n))
    cdef double[::1] root = np.empty(n)
    cdef double sc, cl, ch, smin, smax, dmin, dmax, cmin, cmax, best_lo, best_hi, t
    cdef Py_ssize_t arg_lo
    cdef bint used
    bad = None
    for j in range(n):
        root[j] = sqrt(fmax(diag[j], 0.0))
    for j in range(n):
        for l in range(n):
            sc = root[j] * root[l]
            if sc > 0.0:
                cl = -1.0 if lo[j, l] == -INFINITY else _clip1(lo[j, l] / sc)
                ch = 1.0 if hi[j, l] == INFINITY else _clip1(hi[j, l] / sc)
            else:
                cl = -1.0
                ch = 1.0
            # outward rounding: acos amplifies input roundoff by 1/sin near +-1
            amin[j, l] = fmax(acos(ch) - _angle_pad(ch), 0.0)
            amax[j, l] = fmin(acos(cl) + _angle_pad(cl), M_PI)
    for j in range(n):
        for l in range(j + 1, n):
            if known[j, l]:
                continue
            used = False
            best_lo = -INFINITY
            best_hi = INFINITY
            arg_lo = -1
            sc = root[j] * root[l]
            for k in range(n):
                if k == j or k == l or not avail[j, k] or not avail[k, l] or diag[k] <= pivot_tol:
                    continue
                used = True
                smin = amin[j, k] + amin[k, l]
                smax = amax[j, k] + amax[k, l]
                if smin <= M_PI and smax >= M_PI:
                    cmin = -1.0
                else:
                    cmin = fmin(cos(smin), cos(smax))
                dmin = amin[j, k] - amax[k, l]
                dmax = amax[j, k] - amin[k, l]
                if dmin <= 0.0 and dmax >= 0.0:
                    cmax = 1.0
                else:
                    cmax = fmax(cos(dmin), cos(dmax))
                cmin = fmax(cmin - COS_PAD, -1.0)
                cmax = fmin(cmax + COS_PAD, 1.0)
                if sc * cmin > best_lo:
                    best_lo = sc * cmin
                    arg_lo = k
                best_hi = fmin(best_hi, sc * cmax)
            if not used:
                continue
            nlo[j, l] = fmax(lo[j, l], best_lo)
            nhi[j, l] = fmin(hi[j, l], best_hi)
            nav[j, l] = 1
            if nlo[j, l] > nhi[j, l]:
                if bad is None and nlo[j, l] - nhi[j, l] > empty_tol * fmax(sc, 1.0):
                    bad = (int(j), int(arg_lo), int(l))
                t = nlo[j, l]
                nlo[j, l] = nhi[j, l]
                nhi[j, l] = t
            nlo[l, j] = nlo[j, l]
            nhi[l, j] = nhi[j, l]
            nav[l, j] = 1
    return new_lo_arr, new_hi_arr, new_av_arr.astype(bool), bad
