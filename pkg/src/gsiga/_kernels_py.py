"""Pure numpy implementations of the hot kernels.

These are the reference versions; ``_ckernels.pyx`` mirrors every function
here with the same signature and must agree to rounding.
"""
import numpy as np


def find_spans(knots, degree, x):
    """Knot span index for every entry of ``x``.

    Right-continuous at interior knots; ``x == knots[-1]`` is assigned to the
    last non-empty span (left limit).
    """
    knots = np.asarray(knots, dtype=float)
    x = np.asarray(x, dtype=float)
    n = len(knots) - degree - 1
    spans = np.searchsorted(knots, x, side="right") - 1
    return np.clip(spans, degree, n - 1).astype(np.int64)


def basis_funs_ders(knots, degree, x, nders):
    """Non-vanishing B-splines and their derivatives at many points.

    Parameters
    ----------
    knots : array_like
        Open knot vector.
    degree : int
        Polynomial degree ``p``.
    x : array_like
        Evaluation points, shape ``(npts,)``.
    nders : int
        Highest derivative order requested.

    Returns
    -------
    spans : ndarray of int64, shape (npts,)
        Span index; the first active function is ``spans - degree``.
    ders : ndarray, shape (npts, nders + 1, degree + 1)
        ``ders[k, d, r]`` is the ``d``-th derivative of function
        ``spans[k] - degree + r`` at ``x[k]``.
    """
    knots = np.asarray(knots, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    p = int(degree)
    npts = x.shape[0]
    spans = find_spans(knots, p, x)

    ndu = np.zeros((p + 1, p + 1, npts))
    ndu[0, 0] = 1.0
    left = np.zeros((p + 1, npts))
    right = np.zeros((p + 1, npts))
    for j in range(1, p + 1):
        left[j] = x - knots[spans + 1 - j]
        right[j] = knots[spans + j] - x
        saved = np.zeros(npts)
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved

    ders = np.zeros((npts, nders + 1, p + 1))
    ders[:, 0, :] = ndu[:, p, :].T
    du = min(nders, p)
    a = np.zeros((2, p + 1, npts))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for k in range(1, du + 1):
            d = np.zeros(npts)
            rk = r - k
            pk = p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d = d + a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d = d + a[s2, k] * ndu[r, pk]
            ders[:, k, r] = d
            s1, s2 = s2, s1
    fac = float(p)
    for k in range(1, du + 1):
        ders[:, k, :] *= fac
        fac *= p - k
    return spans, ders


def element_mass(bx, by, w):
    """Weighted element mass matrices on a tensor grid of cells.

    ``bx`` has shape ``(nex, q, p+1)``, ``by`` ``(ney, q, p+1)`` and ``w``
    ``(nex, ney, q, q)``. Returns ``(nex, ney, p+1, p+1, p+1, p+1)`` indexed
    by test ``(r, s)`` then trial ``(t, u)``.
    """
    return _pair(w, bx, by, bx, by)


def element_stiffness(bx, dbx, by, dby, K):
    """Element matrices of ``grad(w_i)^T K grad(w_j)`` with ``K`` of shape
    ``(nex, ney, q, q, 2, 2)``."""
    gx = (dbx, bx)
    gy = (by, dby)
    out = None
    for al in range(2):
        for be in range(2):
            term = _pair(K[..., al, be], gx[al], gy[al], gx[be], gy[be])
            out = term if out is None else out + term
    return out


def element_load(bx, by, w):
    """Element load vectors ``sum_q w N_r(x) M_s(y)``, shape
    ``(nex, ney, p+1, p+1)``."""
    return np.einsum("XYab,Xar,Ybs->XYrs", w, bx, by, optimize=True)


def _pair(w, ax, ay, bx, by):
    tmp = np.einsum("XYab,Ybs,Ybu->XYasu", w, ay, by)
    return np.einsum("XYasu,Xar,Xat->XYrstu", tmp, ax, bx)
