"""Gauss quadrature assembly of the weak-form matrices and vectors.

Integration runs patchwise over the knot spans of the finest active level:
element contributions are computed by the kernels in :mod:`gsiga.kernels`,
scattered into the per-face tensor basis with a precomputed index map
(``np.bincount``, so the summation order is fixed) and pulled to the active
basis through the extraction matrix.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import InvalidArgument
from .geometry import EPS_DEGENERATE, curvature_from_derivatives, log_metric_rate, metric_from_jacobian
from .linalg import solve_spd
from .spline import span_quadrature
from .topology import NUM_FACES

DEFAULT_ORDER = 6


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor Gauss rule with ``order`` points per direction and span."""

    order: int = DEFAULT_ORDER


class QuadratureGrid:
    """Quadrature points, basis tables and scatter maps for one space.

    Field arrays at quadrature points have shape ``(6, nel, nel, q, q, ...)``
    indexed by face, element in xi, element in eta, point in xi, point in eta.
    """

    def __init__(self, space, rule=QuadratureRule()):
        self.space = space
        self.rule = rule
        fine = space.fine_map
        self.univariate = fine.univariate
        self.n = fine.n
        self.p = space.p
        self.nel = self.n - self.p
        q = self.q = rule.order
        pts, wts = span_quadrature(fine.knot_vector, q)
        self.points_1d = pts
        first, ders = self.univariate.eval_many(pts.ravel(), 2)
        if not np.array_equal(first.reshape(self.nel, q), np.repeat(np.arange(self.nel), q).reshape(self.nel, q)):
            raise AssertionError("quadrature points not aligned with knot spans")
        self.btab = ders.reshape(self.nel, q, 3, self.p + 1)
        self.colloc = self.univariate.collocation(pts.ravel(), 2)
        self.weights = np.einsum("Xa,Yb->XYab", wts, wts)
        self.xi, self.eta = np.broadcast_arrays(pts[:, None, :, None], pts[None, :, None, :])

    # -- evaluation ----------------------------------------------------------

    def field(self, local, derivative=(0, 0)):
        """Values of per-face tensor splines ``local[(6, n, n, ...)]``."""
        dx, dy = derivative
        vals = np.einsum("an,fnm...,bm->fab...", self.colloc[dx], local, self.colloc[dy], optimize=True)
        nel, q = self.nel, self.q
        vals = vals.reshape((NUM_FACES, nel, q, nel, q) + vals.shape[3:])
        return np.moveaxis(vals, 3, 2)

    def geometry(self, control_points, second=False):
        """Geometry of a mapping (active-basis control points) at all points."""
        return QuadGeometry(self, control_points, second)

    # -- scatter maps ----------------------------------------------------------

    @cached_property
    def _elem_index(self):
        n, p1, nel = self.n, self.p + 1, self.nel
        X = np.arange(nel)[:, None, None, None]
        Y = np.arange(nel)[None, :, None, None]
        r = np.arange(p1)[None, None, :, None]
        s = np.arange(p1)[None, None, None, :]
        loc = (X + r) * n + (Y + s)
        return np.stack([f * n * n + loc for f in range(NUM_FACES)])

    @cached_property
    def _vector_index(self):
        idx = self._elem_index
        if self.space.is_uniform:
            return self.space.fine_map.local_to_global.ravel()[idx], self.space.num_dofs
        return idx, NUM_FACES * self.n * self.n

    @cached_property
    def _matrix_pattern(self):
        idx, size = self._vector_index
        p1 = self.p + 1
        shp = idx.shape[:3] + (p1, p1, p1, p1)
        rows = np.broadcast_to(idx[..., :, :, None, None], shp).ravel()
        cols = np.broadcast_to(idx[..., None, None, :, :], shp).ravel()
        keys = rows.astype(np.int64) * size + cols
        uniq, inv = np.unique(keys, return_inverse=True)
        r, c = np.divmod(uniq, size)
        indptr = np.zeros(size + 1, dtype=np.int64)
        np.add.at(indptr, r + 1, 1)
        return np.cumsum(indptr), c, inv, size

    def scatter_vector(self, elem):
        """Element vectors ``(6, nel, nel, p+1, p+1)`` -> active-basis vector."""
        idx, size = self._vector_index
        v = np.bincount(idx.ravel(), weights=elem.ravel(), minlength=size)
        if self.space.is_uniform:
            return v
        return self.space.extraction @ v

    def scatter_matrix(self, elem):
        """Element matrices ``(6, nel, nel, p+1, p+1, p+1, p+1)`` -> sparse."""
        indptr, indices, inv, size = self._matrix_pattern
        data = np.bincount(inv, weights=elem.ravel(), minlength=len(indices))
        M = sp.csr_matrix((data, indices, indptr), shape=(size, size))
        if self.space.is_uniform:
            return M
        E = self.space.extraction
        out = sp.csr_matrix(E @ M @ E.T)
        out.sort_indices()
        return out

    # -- element integrals -----------------------------------------------------

    def _per_face(self, fn, workers):
        if workers and workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as ex:
                parts = list(ex.map(fn, range(NUM_FACES)))
        else:
            parts = [fn(f) for f in range(NUM_FACES)]
        return np.stack(parts)

    def load_vector(self, weight, workers=1):
        """``(sum_q weight * w_i)`` for all active ``w_i``; ``weight`` already
        includes Gauss weights and any area factor."""
        b = self.btab[:, :, 0, :]
        elem = self._per_face(lambda f: kernels.element_load(b, b, weight[f]), workers)
        return self.scatter_vector(elem)

    def mass_matrix(self, weight, workers=1):
        b = self.btab[:, :, 0, :]
        elem = self._per_face(lambda f: kernels.element_mass(b, b, weight[f]), workers)
        return self.scatter_matrix(elem)

    def stiffness_matrix(self, K, workers=1):
        b = self.btab[:, :, 0, :]
        db = self.btab[:, :, 1, :]
        elem = self._per_face(lambda f: kernels.element_stiffness(b, db, b, db, K[f]), workers)
        return self.scatter_matrix(elem)

    def integrate(self, values):
        """``sum_q weight * values`` over all faces (parametric measure on
        ``[0, 1]^2`` per face)."""
        w = self.weights[None]
        return np.einsum("fXYab,fXYab...->...", np.broadcast_to(w, values.shape[:5]), values)


class QuadGeometry:
    """Mapping values, metric and (optionally) curvature at quadrature points."""

    def __init__(self, quad, control_points, second=False, eps=EPS_DEGENERATE):
        local = quad.space.to_local(control_points)
        self.s = quad.field(local)
        J = np.stack([quad.field(local, (1, 0)), quad.field(local, (0, 1))], -1)
        self.metric = metric_from_jacobian(J, eps, location=lambda idx: _quad_location(quad, idx))
        self.sqrt_g = self.metric.sqrt_g
        self.normal = self.metric.normal
        self.curvature = None
        if second:
            self.curvature = curvature_from_derivatives(
                J, quad.field(local, (2, 0)), quad.field(local, (1, 1)), quad.field(local, (0, 2)), self.metric
            )


def _quad_location(quad, idx):
    f, X, Y, a, b = idx[:5]
    return {"face": int(f), "xi": float(quad.points_1d[X, a]), "eta": float(quad.points_1d[Y, b])}


@dataclass
class AssembledSystem:
    """Weak-form objects on the current geometry ``s^k``.

    ``A`` mass, ``D`` stiffness, ``B`` dilution, ``f_r`` reaction load and
    ``w_vec`` the basis integrals, all with respect to ``sqrt(g_k) dxi``.
    ``geometry`` and ``rate`` keep the quadrature-point data for the
    coercivity check and the geometry update.
    """

    A: sp.csr_matrix
    D: sp.csr_matrix
    B: sp.csr_matrix
    f_r: np.ndarray
    w_vec: np.ndarray
    geometry: QuadGeometry
    rate: np.ndarray
    quad: QuadratureGrid


def assemble(quad, e_now, e_prev, h_prev, c, d, workers=1, geo_now=None, geo_prev=None):
    """Assemble ``A, D, B, f_r, w`` on the geometry with control points
    ``e_now``; ``e_prev`` and ``h_prev`` feed the dilution rate.

    ``geo_now`` / ``geo_prev`` may pass already evaluated geometries of
    ``e_now`` / ``e_prev`` on this grid.
    """
    geo = geo_now if geo_now is not None else quad.geometry(e_now)
    W = quad.weights[None] * geo.sqrt_g
    if e_prev is None or e_prev is e_now:
        rate = np.zeros_like(geo.sqrt_g)
    else:
        prev = geo_prev if geo_prev is not None else quad.geometry(e_prev)
        rate = log_metric_rate(geo.sqrt_g, prev.sqrt_g, h_prev)
    A = quad.mass_matrix(W, workers)
    K = W[..., None, None] * geo.metric.g_inv
    D = quad.stiffness_matrix(K, workers)
    if np.any(rate):
        B = quad.mass_matrix(W * rate, workers)
    else:
        B = A.copy()
        B.data[:] = 0.0
    space = quad.space
    u = quad.field(space.to_local(c))
    v = quad.field(space.to_local(d))
    f_r = quad.load_vector(W * u * v * v, workers)
    w_vec = quad.load_vector(W, workers)
    return AssembledSystem(A=A, D=D, B=B, f_r=f_r, w_vec=w_vec, geometry=geo, rate=rate, quad=quad)


def bilinear_energy(M, x, y):
    """``x^T M y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if M.shape != (x.shape[0], y.shape[0]):
        raise InvalidArgument("dimension mismatch in bilinear form")
    return float(x @ (M @ y))


def mass_matrix(quad, control_points=None):
    """Mass matrix in the surface measure of ``control_points`` or, if
    omitted, the parametric measure on ``[0, 1]^2`` per face."""
    if control_points is None:
        W = np.broadcast_to(quad.weights[None], (NUM_FACES,) + quad.weights.shape)
    else:
        W = quad.weights[None] * quad.geometry(control_points).sqrt_g
    return quad.mass_matrix(np.ascontiguousarray(W))


def l2_project(target, quad, measure="parametric", control_points=None, tol=1e-12):
    """Least-squares projection of ``target`` onto the active basis.

    ``target(face, xi, eta)`` receives arrays of parametric points and
    returns values of shape ``xi.shape`` or ``xi.shape + (k,)``.
    ``measure`` is ``"parametric"`` or ``"surface"`` (the latter needs
    ``control_points`` of the surface).
    """
    if measure == "parametric":
        W = np.broadcast_to(quad.weights[None], (NUM_FACES,) + quad.weights.shape)
    elif measure == "surface":
        if control_points is None:
            raise InvalidArgument("surface measure needs control points")
        W = quad.weights[None] * quad.geometry(control_points).sqrt_g
    else:
        raise InvalidArgument(f"unknown measure {measure!r}")
    W = np.ascontiguousarray(W)
    vals = np.stack([np.asarray(target(f, quad.xi, quad.eta), dtype=float) for f in range(NUM_FACES)])
    M = quad.mass_matrix(W)
    if vals.ndim == 5:
        return solve_spd(M, quad.load_vector(W * vals), tol)
    rhs = np.stack([quad.load_vector(W * vals[..., k]) for k in range(vals.shape[-1])], 1)
    return solve_spd(M, rhs, tol)


def sample_target(target, quad):
    return np.stack([np.asarray(target(f, quad.xi, quad.eta), dtype=float) for f in range(NUM_FACES)])
