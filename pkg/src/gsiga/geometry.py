"""Surface mapping, metric, normals and curvature.

All pointwise routines are vectorised over leading axes: a Jacobian array of
shape ``(..., 3, 2)`` yields metric data of shape ``(..., 2, 2)`` etc.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMetric, InvalidArgument, UnsupportedLocation
from .topology import FACES

EPS_DEGENERATE = 1e-14


def cube_to_sphere(points, R=1.0, atol=1e-12):
    """Map points on the surface of ``[-1, 1]^3`` onto the sphere of radius ``R``."""
    x = np.asarray(points, dtype=float)
    if x.shape[-1] != 3:
        raise InvalidArgument("points must have a trailing dimension of 3")
    if np.any(np.abs(np.max(np.abs(x), axis=-1) - 1.0) > atol):
        raise InvalidArgument("point is not on the cube surface")
    x2 = x * x
    out = np.empty_like(x)
    for k in range(3):
        a, b = x2[..., (k + 1) % 3], x2[..., (k + 2) % 3]
        out[..., k] = x[..., k] * np.sqrt(1.0 - a / 2.0 - b / 2.0 + a * b / 3.0)
    return R * out


def sphere_patch(face, xi, eta, R=1.0):
    """The initial sphere parameterised over face ``face``."""
    return cube_to_sphere(FACES[int(face)].cube_point(xi, eta), R)


@dataclass
class MetricData:
    J: np.ndarray
    g: np.ndarray
    sqrt_g: np.ndarray
    g_inv: np.ndarray
    normal: np.ndarray


@dataclass
class CurvatureData:
    L: np.ndarray
    S: np.ndarray
    kappa1: np.ndarray
    kappa2: np.ndarray

    @property
    def squared_sum(self):
        return self.kappa1**2 + self.kappa2**2


def metric_from_jacobian(J, eps=EPS_DEGENERATE, location=None):
    """Metric data from Jacobians of shape ``(..., 3, 2)``.

    Raises :class:`DegenerateMetric` where ``det g <= eps``.
    """
    J = np.asarray(J, dtype=float)
    a, b = J[..., 0], J[..., 1]
    g11 = np.einsum("...k,...k->...", a, a)
    g12 = np.einsum("...k,...k->...", a, b)
    g22 = np.einsum("...k,...k->...", b, b)
    det = g11 * g22 - g12 * g12
    bad = ~(det > eps)
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        loc = location(tuple(idx)) if callable(location) else (location, tuple(int(i) for i in idx))
        raise DegenerateMetric(f"degenerate metric (det g = {det[tuple(idx)]:.3e})", loc)
    g = np.stack([np.stack([g11, g12], -1), np.stack([g12, g22], -1)], -2)
    ginv = np.stack([np.stack([g22, -g12], -1), np.stack([-g12, g11], -1)], -2) / det[..., None, None]
    cr = np.cross(a, b)
    nrm = np.linalg.norm(cr, axis=-1)
    return MetricData(J=J, g=g, sqrt_g=np.sqrt(det), g_inv=ginv, normal=cr / nrm[..., None])


def surface_gradient_factor(metric, grad_hat):
    """``g^{-1} grad_hat`` for local gradients of shape ``(..., 2)``."""
    return np.einsum("...ij,...j->...i", metric.g_inv, grad_hat)


def metric_inner(metric, grad_a, grad_b):
    """``<grad a, grad b>_g = grad_a^T g^{-1} grad_b`` from local gradients."""
    return np.einsum("...i,...ij,...j->...", grad_a, metric.g_inv, grad_b)


def curvature_from_derivatives(J, s_xixi, s_xieta, s_etaeta, metric=None):
    """Second fundamental form, shape operator and principal curvatures."""
    if metric is None:
        metric = metric_from_jacobian(J)
    n = metric.normal
    l11 = np.einsum("...k,...k->...", s_xixi, n)
    l12 = np.einsum("...k,...k->...", s_xieta, n)
    l22 = np.einsum("...k,...k->...", s_etaeta, n)
    L = np.stack([np.stack([l11, l12], -1), np.stack([l12, l22], -1)], -2)
    S = metric.g_inv @ L
    # eigenvalues of g^{-1} L are real (generalised symmetric problem)
    # discriminant written without the tr^2/4 - det cancellation at umbilics
    tr = S[..., 0, 0] + S[..., 1, 1]
    half = (S[..., 0, 0] - S[..., 1, 1]) / 2.0
    disc = np.sqrt(np.maximum(half * half + S[..., 0, 1] * S[..., 1, 0], 0.0))
    return CurvatureData(L=L, S=S, kappa1=tr / 2.0 + disc, kappa2=tr / 2.0 - disc)


def sqrt_g_gradient(J, s_xixi, s_xieta, s_etaeta, metric=None):
    """Local gradient ``(d/dxi, d/deta)`` of ``sqrt g``, shape ``(..., 2)``."""
    if metric is None:
        metric = metric_from_jacobian(J)
    a, b = J[..., 0], J[..., 1]
    dot = lambda x, y: np.einsum("...k,...k->...", x, y)  # noqa: E731
    out = []
    for da, db in ((s_xixi, s_xieta), (s_xieta, s_etaeta)):
        ddet = 2 * dot(a, da) * dot(b, b) + 2 * dot(a, a) * dot(b, db) - 2 * dot(a, b) * (dot(da, b) + dot(a, db))
        out.append(ddet / (2.0 * metric.sqrt_g))
    return np.stack(out, -1)


def geometric_divergence(sqrt_g, grad_sqrt_g, u, du):
    """``(1/sqrt g) d_i(sqrt g u^i)`` of a tangent field ``J u``.

    ``u`` holds the local components ``(..., 2)`` and ``du[..., i]`` the
    derivative of ``u^i`` with respect to the ``i``-th parameter.
    """
    return du[..., 0] + du[..., 1] + np.einsum("...i,...i->...", u, grad_sqrt_g) / sqrt_g


def log_metric_rate(sqrt_g_now, sqrt_g_prev, h_prev):
    """Backward difference ``(ln sqrt g_k - ln sqrt g_{k-1}) / h_{k-1}``."""
    now = np.asarray(sqrt_g_now, dtype=float)
    prev = np.asarray(sqrt_g_prev, dtype=float)
    if np.any(now <= 0) or np.any(prev <= 0):
        raise DegenerateMetric("non-positive area density in dilution rate")
    if h_prev <= 0:
        raise InvalidArgument("previous step size must be positive")
    return (np.log(now) - np.log(prev)) / h_prev


class MappingOperator:
    """Spline surface ``s = sum_i e_i w_i`` over a :class:`SplineSpace`.

    Immutable: updates create new instances.
    """

    def __init__(self, space, control_points):
        cp = np.array(control_points, dtype=float)
        if cp.shape != (space.num_dofs, 3):
            raise InvalidArgument(f"control points must have shape ({space.num_dofs}, 3)")
        cp.setflags(write=False)
        self.space = space
        self.control_points = cp

    def with_points(self, control_points):
        return MappingOperator(self.space, control_points)

    def evaluate(self, face, xi, eta, derivative="value"):
        return self.space.evaluate(self.control_points, face, xi, eta, derivative)

    def jacobian(self, face, xi, eta):
        return np.stack([self.evaluate(face, xi, eta, "d_xi"), self.evaluate(face, xi, eta, "d_eta")], -1)


def metric_at(mapping, face, xi, eta, eps=EPS_DEGENERATE):
    J = mapping.jacobian(face, xi, eta)
    return metric_from_jacobian(J, eps, location=(int(face), (xi, eta)))


def curvature_at(mapping, face, xi, eta):
    """Principal curvatures of the spline surface at interior points of a face."""
    if mapping.space.p < 2:
        raise UnsupportedLocation("curvature needs degree >= 2")
    xi_a, eta_a = np.asarray(xi, dtype=float), np.asarray(eta, dtype=float)
    on_edge = (xi_a <= 0) | (xi_a >= 1) | (eta_a <= 0) | (eta_a >= 1)
    if np.any(on_edge):
        raise UnsupportedLocation("curvature is not defined on patch interfaces")
    J = mapping.jacobian(face, xi, eta)
    metric = metric_from_jacobian(J, location=(int(face), (xi, eta)))
    return curvature_from_derivatives(
        J,
        mapping.evaluate(face, xi, eta, "d_xixi"),
        mapping.evaluate(face, xi, eta, "d_xieta"),
        mapping.evaluate(face, xi, eta, "d_etaeta"),
        metric,
    )
