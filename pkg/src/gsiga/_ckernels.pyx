# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_kernels_py``; identical signatures."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def find_spans(knots, degree, x):
    cdef const double[::1] kv = np.ascontiguousarray(knots, dtype=np.float64)
    cdef const double[::1] xv = np.ascontiguousarray(np.atleast_1d(x), dtype=np.float64)
    cdef Py_ssize_t npts = xv.shape[0]
    cdef long p = degree
    cdef long n = kv.shape[0] - p - 1
    out = np.empty(npts, dtype=np.int64)
    cdef long long[::1] ov = out
    cdef Py_ssize_t k
    for k in range(npts):
        ov[k] = _span(kv, p, n, xv[k])
    return out


cdef inline long _span(const double[::1] kv, long p, long n, double x) nogil:
    # bisection on the right-continuous convention; x at the end -> last span
    cdef long lo = p, hi = n, mid
    if x >= kv[n]:
        return n - 1
    if x <= kv[p]:
        return p
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if x < kv[mid]:
            hi = mid
        else:
            lo = mid
    return lo


def basis_funs_ders(knots, degree, x, nders):
    cdef const double[::1] kv = np.ascontiguousarray(knots, dtype=np.float64)
    cdef const double[::1] xv = np.ascontiguousarray(np.atleast_1d(x), dtype=np.float64)
    cdef long p = degree
    cdef long nd = nders
    cdef long n = kv.shape[0] - p - 1
    cdef Py_ssize_t npts = xv.shape[0]
    spans = np.empty(npts, dtype=np.int64)
    ders = np.zeros((npts, nd + 1, p + 1))
    cdef long long[::1] sv = spans
    cdef double[:, :, ::1] dv = ders
    cdef double[:, ::1] ndu = np.zeros((p + 1, p + 1))
    cdef double[:, ::1] a = np.zeros((2, p + 1))
    cdef double[::1] left = np.zeros(p + 1)
    cdef double[::1] right = np.zeros(p + 1)
    cdef Py_ssize_t k
    cdef long span, j, r, s1, s2, kk, rk, pk, j1, j2, jj, du
    cdef double saved, temp, d, xx, fac
    du = nd if nd < p else p
    for k in range(npts):
        xx = xv[k]
        span = _span(kv, p, n, xx)
        sv[k] = span
        ndu[0, 0] = 1.0
        for j in range(1, p + 1):
            left[j] = xx - kv[span + 1 - j]
            right[j] = kv[span + j] - xx
            saved = 0.0
            for r in range(j):
                ndu[j, r] = right[r + 1] + left[j - r]
                temp = ndu[r, j - 1] / ndu[j, r]
                ndu[r, j] = saved + right[r + 1] * temp
                saved = left[j - r] * temp
            ndu[j, j] = saved
        for j in range(p + 1):
            dv[k, 0, j] = ndu[j, p]
        for r in range(p + 1):
            s1 = 0
            s2 = 1
            a[0, 0] = 1.0
            for kk in range(1, du + 1):
                d = 0.0
                rk = r - kk
                pk = p - kk
                if r >= kk:
                    a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                    d = a[s2, 0] * ndu[rk, pk]
                j1 = 1 if rk >= -1 else -rk
                j2 = kk - 1 if r - 1 <= pk else p - r
                for jj in range(j1, j2 + 1):
                    a[s2, jj] = (a[s1, jj] - a[s1, jj - 1]) / ndu[pk + 1, rk + jj]
                    d = d + a[s2, jj] * ndu[rk + jj, pk]
                if r <= pk:
                    a[s2, kk] = -a[s1, kk - 1] / ndu[pk + 1, r]
                    d = d + a[s2, kk] * ndu[r, pk]
                dv[k, kk, r] = d
                j = s1
                s1 = s2
                s2 = j
        fac = <double>p
        for kk in range(1, du + 1):
            for j in range(p + 1):
                dv[k, kk, j] *= fac
            fac *= p - kk
    return spans, ders


cdef void _pair_acc(const double[:, :, :, ::1] w, const double[:, :, ::1] ax, const double[:, :, ::1] ay,
                    const double[:, :, ::1] bx, const double[:, :, ::1] by,
                    double[:, :, :, :, :, ::1] out, double[:, :, ::1] tmp) nogil:
    cdef Py_ssize_t nex = w.shape[0], ney = w.shape[1], q = w.shape[2]
    cdef Py_ssize_t nb = ax.shape[2]
    cdef Py_ssize_t X, Y, a_, b_, r, s, t, u
    cdef double acc, c
    for X in range(nex):
        for Y in range(ney):
            # tmp[a, s, u] = sum_b w[a, b] ay[b, s] by[b, u]
            for a_ in range(q):
                for s in range(nb):
                    for u in range(nb):
                        acc = 0.0
                        for b_ in range(q):
                            acc = acc + w[X, Y, a_, b_] * ay[Y, b_, s] * by[Y, b_, u]
                        tmp[a_, s, u] = acc
            for r in range(nb):
                for s in range(nb):
                    for t in range(nb):
                        for u in range(nb):
                            acc = 0.0
                            for a_ in range(q):
                                acc = acc + tmp[a_, s, u] * ax[X, a_, r] * bx[X, a_, t]
                            out[X, Y, r, s, t, u] += acc


def element_mass(bx, by, w):
    cdef const double[:, :, ::1] bxv = np.ascontiguousarray(bx, dtype=np.float64)
    cdef const double[:, :, ::1] byv = np.ascontiguousarray(by, dtype=np.float64)
    cdef const double[:, :, :, ::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t nb = bxv.shape[2], q = wv.shape[2]
    out = np.zeros((wv.shape[0], wv.shape[1], nb, nb, nb, nb))
    cdef double[:, :, ::1] tmp = np.zeros((q, nb, nb))
    _pair_acc(wv, bxv, byv, bxv, byv, out, tmp)
    return out


def element_stiffness(bx, dbx, by, dby, K):
    cdef const double[:, :, ::1] bxv = np.ascontiguousarray(bx, dtype=np.float64)
    cdef const double[:, :, ::1] dbxv = np.ascontiguousarray(dbx, dtype=np.float64)
    cdef const double[:, :, ::1] byv = np.ascontiguousarray(by, dtype=np.float64)
    cdef const double[:, :, ::1] dbyv = np.ascontiguousarray(dby, dtype=np.float64)
    Karr = np.asarray(K, dtype=np.float64)
    cdef Py_ssize_t nb = bxv.shape[2], q = Karr.shape[2]
    out = np.zeros((Karr.shape[0], Karr.shape[1], nb, nb, nb, nb))
    cdef double[:, :, ::1] tmp = np.zeros((q, nb, nb))
    gx = (dbxv, bxv)
    gy = (byv, dbyv)
    cdef const double[:, :, :, ::1] kab
    for al in range(2):
        for be in range(2):
            kab = np.ascontiguousarray(Karr[..., al, be])
            _pair_acc(kab, gx[al], gy[al], gx[be], gy[be], out, tmp)
    return out


def element_load(bx, by, w):
    cdef const double[:, :, ::1] bxv = np.ascontiguousarray(bx, dtype=np.float64)
    cdef const double[:, :, ::1] byv = np.ascontiguousarray(by, dtype=np.float64)
    cdef const double[:, :, :, ::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t nex = wv.shape[0], ney = wv.shape[1], q = wv.shape[2]
    cdef Py_ssize_t nb = bxv.shape[2]
    out = np.zeros((nex, ney, nb, nb))
    cdef double[:, :, :, ::1] ov = out
    cdef Py_ssize_t X, Y, a_, b_, r, s
    cdef double acc
    with nogil:
        for X in range(nex):
            for Y in range(ney):
                for r in range(nb):
                    for s in range(nb):
                        acc = 0.0
                        for a_ in range(q):
                            for b_ in range(q):
                                acc = acc + wv[X, Y, a_, b_] * bxv[X, a_, r] * byv[Y, b_, s]
                        ov[X, Y, r, s] = acc
    return out
