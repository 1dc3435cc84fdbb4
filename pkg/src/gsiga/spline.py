"""Univariate and tensor-product B-spline bases on the unit interval/square.

Evaluation follows the right-continuous convention at interior knots; the
point ``xi = 1`` is evaluated as a left limit so every parameter in ``[0, 1]``
belongs to exactly one knot span. Only the ``p + 1`` functions that are active
at a point are returned.

Tensor-product functions are numbered row-major: ``w_{i,j} = N_i M_j`` has
index ``i * m + j``.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import InvalidArgument, OutOfDomain

__all__ = [
    "KnotVector",
    "UnivariateBasis",
    "TensorBasis",
    "ProlongationMap",
    "make_open_uniform_knots",
    "eval_basis",
    "uniform_refine",
    "insert_knot_matrix",
    "gauss_rule",
    "span_quadrature",
]


@dataclass(frozen=True)
class KnotVector:
    knots: np.ndarray
    degree: int

    def __post_init__(self):
        t = np.array(self.knots, dtype=float)
        p = int(self.degree)
        if p < 0:
            raise InvalidArgument("degree must be non-negative")
        if t.ndim != 1 or len(t) < 2 * (p + 1):
            raise InvalidArgument("knot vector too short for the degree")
        if np.any(np.diff(t) < 0):
            raise InvalidArgument("knot vector must be non-decreasing")
        if np.any(t[: p + 1] != 0.0) or np.any(t[-(p + 1):] != 1.0):
            raise InvalidArgument("knot vector must be open on [0, 1]")
        t.setflags(write=False)
        object.__setattr__(self, "knots", t)
        object.__setattr__(self, "degree", p)

    @property
    def n(self):
        """Cardinality of the associated basis."""
        return len(self.knots) - self.degree - 1

    @property
    def breaks(self):
        return np.unique(self.knots)

    @property
    def num_spans(self):
        return len(self.breaks) - 1

    def __len__(self):
        return len(self.knots)

    def __eq__(self, other):
        if not isinstance(other, KnotVector):
            return NotImplemented
        return self.degree == other.degree and np.array_equal(self.knots, other.knots)

    def __hash__(self):
        return hash((self.degree, self.knots.tobytes()))


def make_open_uniform_knots(n, p):
    """Open uniform knot vector with ``n`` functions of degree ``p``.

    ``p + 1`` zeros, interior knots ``i / (n - p)`` for ``i = 1 .. n-p-1``,
    ``p + 1`` ones.
    """
    n, p = int(n), int(p)
    if p < 0 or n <= p:
        raise InvalidArgument(f"need n >= p + 1, got n={n}, p={p}")
    interior = np.arange(1, n - p) / (n - p)
    return KnotVector(np.concatenate([np.zeros(p + 1), interior, np.ones(p + 1)]), p)


@dataclass(frozen=True)
class UnivariateBasis:
    knot_vector: KnotVector

    @property
    def degree(self):
        return self.knot_vector.degree

    @property
    def n(self):
        return self.knot_vector.n

    @property
    def knots(self):
        return self.knot_vector.knots

    def eval(self, xi, derivative_order=0):
        return eval_basis(self, xi, derivative_order)

    def eval_many(self, xi, nders=0):
        """Vectorised evaluation: ``(first_index, values[npts, nders+1, p+1])``."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        _check_domain(xi)
        spans, ders = kernels.basis_funs_ders(self.knots, self.degree, xi, nders)
        return spans - self.degree, ders

    def collocation(self, xi, nders=0):
        """Dense matrices ``B_d[k, i] = N_i^{(d)}(xi_k)`` for ``d = 0..nders``."""
        first, ders = self.eval_many(xi, nders)
        npts = len(first)
        out = np.zeros((nders + 1, npts, self.n))
        rows = np.repeat(np.arange(npts), self.degree + 1)
        cols = (first[:, None] + np.arange(self.degree + 1)).ravel()
        for d in range(nders + 1):
            out[d, rows, cols] = ders[:, d, :].ravel()
        return out


def _check_domain(xi):
    if np.any(~np.isfinite(xi)) or np.any(xi < 0.0) or np.any(xi > 1.0):
        raise OutOfDomain("parameter outside [0, 1]")


def eval_basis(basis, xi, derivative_order=0):
    """Evaluate the ``p + 1`` active functions (or a derivative) at ``xi``.

    Returns
    -------
    first : int
        Index of the first active function.
    values : ndarray, shape (p + 1,)
    """
    if derivative_order not in (0, 1, 2):
        raise InvalidArgument("derivative_order must be 0, 1 or 2")
    xi = float(xi)
    _check_domain(np.array([xi]))
    spans, ders = kernels.basis_funs_ders(basis.knots, basis.degree, np.array([xi]), derivative_order)
    return int(spans[0]) - basis.degree, ders[0, derivative_order].copy()


@dataclass(frozen=True)
class ProlongationMap:
    """Sparse map of coarse coefficients to fine coefficients."""

    matrix: sp.csr_matrix

    @property
    def shape(self):
        return self.matrix.shape

    def __call__(self, coeffs):
        return self.matrix @ np.asarray(coeffs)


def insert_knot_matrix(knots, p, x):
    """Boehm's knot insertion as an ``(n+1) x n`` matrix acting on coefficients."""
    t = np.asarray(knots, dtype=float)
    n = len(t) - p - 1
    k = int(np.searchsorted(t, x, side="right") - 1)
    rows, cols, vals = [], [], []
    for i in range(n + 1):
        if i <= k - p:
            rows.append(i); cols.append(i); vals.append(1.0)
        elif i >= k + 1:
            rows.append(i); cols.append(i - 1); vals.append(1.0)
        else:
            alpha = (x - t[i]) / (t[i + p] - t[i])
            rows += [i, i]; cols += [i, i - 1]; vals += [alpha, 1.0 - alpha]
    T = sp.csr_matrix((vals, (rows, cols)), shape=(n + 1, n))
    T.eliminate_zeros()
    return T, np.insert(t, k + 1, x)


def uniform_refine(basis):
    """Bisect every non-empty knot span.

    Returns the refined basis and the prolongation carrying coarse
    coefficients to fine coefficients of the same function.
    """
    p = basis.degree
    t = np.array(basis.knots)
    breaks = basis.knot_vector.breaks
    T = sp.identity(basis.n, format="csr")
    for mid in 0.5 * (breaks[:-1] + breaks[1:]):
        Ti, t = insert_knot_matrix(t, p, mid)
        T = Ti @ T
    T = sp.csr_matrix(T)
    T.sort_indices()
    return UnivariateBasis(KnotVector(t, p)), ProlongationMap(T)


@dataclass(frozen=True)
class TensorBasis:
    basis_xi: UnivariateBasis
    basis_eta: UnivariateBasis

    @property
    def shape(self):
        return self.basis_xi.n, self.basis_eta.n

    @property
    def n(self):
        return self.basis_xi.n * self.basis_eta.n

    def index(self, i, j):
        return i * self.basis_eta.n + j

    def eval(self, xi, eta, nders=0):
        """Active tensor functions and derivatives at a single point.

        Returns ``(indices, values)`` where ``values[dx, dy, a]`` is
        ``d^dx/dxi^dx d^dy/deta^dy`` of function ``indices[a]``.
        """
        fx, vx = self.basis_xi.eval_many([xi], nders)
        fy, vy = self.basis_eta.eval_many([eta], nders)
        px, py = self.basis_xi.degree + 1, self.basis_eta.degree + 1
        ii = fx[0] + np.arange(px)
        jj = fy[0] + np.arange(py)
        idx = (ii[:, None] * self.basis_eta.n + jj[None, :]).ravel()
        vals = np.einsum("dr,es->ders", vx[0], vy[0]).reshape(nders + 1, nders + 1, -1)
        return idx, vals

    def refine(self):
        bx, Tx = uniform_refine(self.basis_xi)
        by, Ty = uniform_refine(self.basis_eta)
        return TensorBasis(bx, by), ProlongationMap(sp.csr_matrix(sp.kron(Tx.matrix, Ty.matrix)))


def gauss_rule(order):
    """Gauss-Legendre points and weights on ``[0, 1]`` with ``order`` points."""
    x, w = np.polynomial.legendre.leggauss(int(order))
    return 0.5 * (x + 1.0), 0.5 * w


def span_quadrature(knot_vector, order):
    """Per-span Gauss points; arrays of shape ``(num_spans, order)``."""
    g, gw = gauss_rule(order)
    br = knot_vector.breaks
    lo, hi = br[:-1], br[1:]
    pts = lo[:, None] + (hi - lo)[:, None] * g[None, :]
    wts = (hi - lo)[:, None] * gw[None, :]
    return pts, wts
