import numpy as np
import pytest
import sympy as sy

from gsiga.errors import DegenerateMetric, InvalidArgument, UnsupportedLocation
from gsiga.geometry import (
    MappingOperator,
    cube_to_sphere,
    curvature_at,
    curvature_from_derivatives,
    geometric_divergence,
    log_metric_rate,
    metric_at,
    metric_from_jacobian,
    metric_inner,
    sphere_patch,
    sqrt_g_gradient,
    surface_gradient_factor,
)
from gsiga.spline import UnivariateBasis, make_open_uniform_knots
from gsiga.topology import FACES, eval_local

from conftest import projected_sphere

R = 40.0


def random_cube_points(rng, m):
    x = rng.uniform(-1, 1, (m, 3))
    x[np.arange(m), rng.integers(0, 3, m)] = rng.choice([-1.0, 1.0], m)
    return x


class TestCubeToSphere:
    def test_face_centre(self):
        np.testing.assert_allclose(cube_to_sphere([1, 0, 0], 40), [40, 0, 0])

    def test_corner(self):
        np.testing.assert_allclose(cube_to_sphere([1, 1, 1], 1), np.ones(3) / np.sqrt(3), atol=1e-15)

    def test_norm_identity(self, rng):
        y = cube_to_sphere(random_cube_points(rng, 1000), R)
        assert np.max(np.abs(np.linalg.norm(y, axis=1) - R)) < 1e-10

    def test_interior_point(self):
        with pytest.raises(InvalidArgument):
            cube_to_sphere([0.5, 0.2, 0.1], R)

    def test_patches_agree_on_edges(self, rng):
        from gsiga.topology import build_cube_topology

        _, edges, _ = build_cube_topology()
        t = rng.uniform(0, 1, 10)
        for e in edges:
            (xa, ya), (xb, yb) = e.edge_params(t)
            np.testing.assert_allclose(sphere_patch(e.face_a, xa, ya, R), sphere_patch(e.face_b, xb, yb, R), atol=1e-12)


class TestMetric:
    def test_identity_plane(self):
        J = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        m = metric_from_jacobian(J)
        np.testing.assert_array_equal(m.g, np.eye(2))
        assert m.sqrt_g == 1.0
        np.testing.assert_array_equal(m.normal, [0, 0, 1])

    def test_consistency_random(self, rng):
        J = rng.normal(size=(50, 3, 2))
        m = metric_from_jacobian(J)
        np.testing.assert_allclose(m.g, np.swapaxes(J, 1, 2) @ J, rtol=1e-14)
        np.testing.assert_allclose(m.g_inv @ m.g, np.broadcast_to(np.eye(2), (50, 2, 2)), atol=1e-10)
        np.testing.assert_allclose(np.linalg.norm(m.normal, axis=1), 1.0)
        np.testing.assert_allclose(np.einsum("nk,nkj->nj", m.normal, J), 0.0, atol=1e-12)
        np.testing.assert_allclose(m.sqrt_g, np.sqrt(np.linalg.det(m.g)))

    def test_degenerate(self):
        J = np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]])
        with pytest.raises(DegenerateMetric) as err:
            metric_from_jacobian(J, location="here")
        assert err.value.location is not None

    def test_sphere_area_and_normals(self):
        _, quad, e = projected_sphere(10, 3)
        geo = quad.geometry(e)
        area = quad.integrate(geo.sqrt_g)
        assert abs(area - 4 * np.pi * R**2) / (4 * np.pi * R**2) < 1e-3
        radial = np.einsum("...k,...k->...", geo.normal, geo.s) / np.linalg.norm(geo.s, axis=-1)
        assert radial.min() > 0.99
        np.testing.assert_allclose(np.linalg.norm(geo.normal, axis=-1), 1.0, atol=1e-14)

    def test_metric_at_mapping(self):
        space, _, e = projected_sphere(10, 3)
        m = metric_at(MappingOperator(space, e), 4, np.array([0.3, 0.7]), np.array([0.5, 0.2]))
        assert m.g.shape == (2, 2, 2)
        assert np.all(m.sqrt_g > 0)

    def test_jacobian_finite_difference(self, rng):
        space, _, e = projected_sphere(10, 3)
        s = MappingOperator(space, e)
        h = 1e-6
        for f in range(6):
            x, y = rng.uniform(0.05, 0.95, 2)
            J = s.jacobian(f, x, y)
            fx = (s.evaluate(f, x + h, y) - s.evaluate(f, x - h, y)) / (2 * h)
            fy = (s.evaluate(f, x, y + h) - s.evaluate(f, x, y - h)) / (2 * h)
            np.testing.assert_allclose(J[:, 0], fx, rtol=1e-6, atol=1e-6 * np.abs(J).max())
            np.testing.assert_allclose(J[:, 1], fy, rtol=1e-6, atol=1e-6 * np.abs(J).max())

    def test_mapping_is_immutable(self):
        space, _, e = projected_sphere(5, 2)
        s = MappingOperator(space, e)
        with pytest.raises(ValueError):
            s.control_points[0, 0] = 1.0
        s2 = s.with_points(e * 2)
        assert s2 is not s and s.control_points[0, 0] == e[0, 0]

    def test_mapping_shape_checked(self):
        space, _, e = projected_sphere(5, 2)
        with pytest.raises(InvalidArgument):
            MappingOperator(space, e[:-1])


class TestGradientFactor:
    def test_identity(self, rng):
        m = metric_from_jacobian(np.array([[1.0, 0], [0, 1], [0, 0]]))
        a, b = rng.normal(size=(2, 2))
        assert metric_inner(m, a, b) == pytest.approx(a @ b)
        np.testing.assert_allclose(surface_gradient_factor(m, a), a)

    def test_diag_scaling(self):
        m = metric_from_jacobian(np.array([[2.0, 0], [0, 1], [0, 0]]))
        assert metric_inner(m, np.array([1.0, 0]), np.array([1.0, 0])) == pytest.approx(0.25)

    def test_random_spd_explicit_inverse(self, rng):
        for _ in range(20):
            J = rng.normal(size=(3, 2))
            m = metric_from_jacobian(J)
            (p, q), (_, r) = m.g
            inv = np.array([[r, -q], [-q, p]]) / (p * r - q * q)
            a, b = rng.normal(size=(2, 2))
            assert metric_inner(m, a, b) == pytest.approx(a @ inv @ b, rel=1e-12)
            assert metric_inner(m, a, b) == pytest.approx(metric_inner(m, b, a), rel=1e-14)


def _sympy_sphere_derivatives(face, R_):
    """Analytic first and second derivatives of the cube-to-sphere patch."""
    xi, eta = sy.symbols("xi eta")
    f = FACES[face]
    c = [None] * 3
    c[f.normal_axis] = sy.Integer(f.sign)
    c[f.u_axis] = 2 * xi - 1
    c[f.v_axis] = 2 * eta - 1
    s = []
    for k in range(3):
        a, b = c[(k + 1) % 3] ** 2, c[(k + 2) % 3] ** 2
        s.append(R_ * c[k] * sy.sqrt(1 - a / 2 - b / 2 + a * b / 3))
    s = sy.Matrix(s)
    parts = [s.diff(xi), s.diff(eta), s.diff(xi, 2), s.diff(xi, eta), s.diff(eta, 2)]
    return [sy.lambdify((xi, eta), p, "numpy") for p in parts]


class TestCurvature:
    def test_plane(self):
        J = np.array([[1.0, 0], [0, 1], [0, 0]])
        z = np.zeros(3)
        c = curvature_from_derivatives(J, z, z, z)
        assert c.kappa1 == 0 and c.kappa2 == 0

    @pytest.mark.parametrize("face", [0, 3, 5])
    def test_exact_sphere_umbilic(self, face, rng):
        fx, fy, fxx, fxy, fyy = _sympy_sphere_derivatives(face, R)
        for x, y in rng.uniform(0.05, 0.95, (5, 2)):
            J = np.stack([np.ravel(fx(x, y)), np.ravel(fy(x, y))], -1).astype(float)
            c = curvature_from_derivatives(
                J, np.ravel(fxx(x, y)).astype(float), np.ravel(fxy(x, y)).astype(float), np.ravel(fyy(x, y)).astype(float)
            )
            assert c.kappa1 == pytest.approx(c.kappa2, rel=1e-8)
            assert abs(c.kappa1) == pytest.approx(1 / R, rel=1e-10)

    def test_cylinder_spline_patch(self):
        r, Lz = 2.0, 3.0
        b = UnivariateBasis(make_open_uniform_knots(12, 3))
        t = np.linspace(0, 1, 60)
        B = b.collocation(t, 0)[0]
        X, Y = np.meshgrid(t, t, indexing="ij")
        target = np.stack([r * np.cos(X * np.pi / 2), r * np.sin(X * np.pi / 2), Lz * Y], -1)
        # separable least squares fit per component
        Binv = np.linalg.pinv(B)
        C = np.einsum("ia,abk,jb->ijk", Binv, target, Binv)
        pts = np.array([[0.3, 0.4], [0.5, 0.5], [0.8, 0.2]])
        x, y = pts[:, 0], pts[:, 1]
        J = np.stack([eval_local(b, C, x, y, "d_xi"), eval_local(b, C, x, y, "d_eta")], -1)
        c = curvature_from_derivatives(
            J, eval_local(b, C, x, y, "d_xixi"), eval_local(b, C, x, y, "d_xieta"), eval_local(b, C, x, y, "d_etaeta")
        )
        mags = np.sort(np.abs(np.stack([c.kappa1, c.kappa2], -1)), axis=-1)
        np.testing.assert_allclose(mags[:, 0], 0.0, atol=1e-3)
        np.testing.assert_allclose(mags[:, 1], 1 / r, rtol=5e-3)

    def test_projected_sphere(self):
        space, _, e = projected_sphere(10, 3)
        c = curvature_at(MappingOperator(space, e), 1, np.array([0.3, 0.55]), np.array([0.6, 0.45]))
        np.testing.assert_allclose(np.abs(c.kappa1), 1 / R, rtol=0.02)
        np.testing.assert_allclose(np.abs(c.kappa2), 1 / R, rtol=0.02)
        assert np.all(np.isfinite(c.squared_sum))

    @pytest.mark.parametrize("pt", [(0.0, 0.5), (0.5, 1.0)])
    def test_edge_rejected(self, pt):
        space, _, e = projected_sphere(5, 2)
        with pytest.raises(UnsupportedLocation):
            curvature_at(MappingOperator(space, e), 0, *pt)

    def test_linear_rejected(self):
        space, _, e = projected_sphere(5, 1)
        with pytest.raises(UnsupportedLocation):
            curvature_at(MappingOperator(space, e), 0, 0.5, 0.5)


class TestLogMetricRate:
    def test_static(self):
        assert log_metric_rate(2.0, 2.0, 0.3) == 0.0

    def test_unit_log_ratio(self):
        assert log_metric_rate(np.e * 3.0, 3.0, 1.0) == pytest.approx(1.0)

    def test_radial_expansion(self):
        _, quad, e = projected_sphere(6, 2)
        delta, h = 1e-4, 0.5
        g0 = quad.geometry(e).sqrt_g
        g1 = quad.geometry(e * (1 + delta)).sqrt_g
        np.testing.assert_allclose(log_metric_rate(g1, g0, h), 2 * delta / h, rtol=1e-4)

    @pytest.mark.parametrize("now,prev,h", [(0.0, 1.0, 1.0), (1.0, -1.0, 1.0)])
    def test_nonpositive(self, now, prev, h):
        with pytest.raises(DegenerateMetric):
            log_metric_rate(now, prev, h)

    def test_nonpositive_step(self):
        with pytest.raises(InvalidArgument):
            log_metric_rate(1.0, 1.0, 0.0)


def test_divergence_adjointness():
    # int w div(u) sqrt g + int <grad w, u>_g sqrt g = 0 for u vanishing on the boundary
    space, quad, e = projected_sphere(10, 3)
    local = space.to_local(e)
    f = 2
    fld = lambda d: quad.field(local, d)[f]  # noqa: E731
    J = np.stack([fld((1, 0)), fld((0, 1))], -1)
    m = metric_from_jacobian(J)
    gs = sqrt_g_gradient(J, fld((2, 0)), fld((1, 1)), fld((0, 2)), m)
    x, y = quad.xi, quad.eta
    bump = (x * (1 - x) * y * (1 - y)) ** 2
    dbx = 2 * x * (1 - x) * (1 - 2 * x) * (y * (1 - y)) ** 2
    dby = 2 * y * (1 - y) * (1 - 2 * y) * (x * (1 - x)) ** 2
    w = 1 + x * y**2
    gw = np.stack([y**2, 2 * x * y], -1)
    u = np.stack([bump * (1 + x), bump * y * y], -1)
    du = np.stack([dbx * (1 + x) + bump, dby * y * y + bump * 2 * y], -1)
    div = geometric_divergence(m.sqrt_g, gs, u, du)
    # <grad w, J u>_g with grad w = J g^-1 grad_hat w equals grad_hat w . u
    lhs = np.sum(quad.weights * w * div * m.sqrt_g)
    rhs = np.sum(quad.weights * np.einsum("...i,...i->...", gw, u) * m.sqrt_g)
    scale = np.sum(quad.weights * np.abs(w * div * m.sqrt_g))
    assert abs(lhs + rhs) < 1e-8 * scale


def test_sqrt_g_gradient_finite_difference():
    space, _, e = projected_sphere(8, 3)
    s = MappingOperator(space, e)
    h = 1e-6
    x, y = 0.37, 0.61

    def sg(a, b):
        return metric_at(s, 5, a, b).sqrt_g

    J = s.jacobian(5, x, y)
    g = sqrt_g_gradient(J, s.evaluate(5, x, y, "d_xixi"), s.evaluate(5, x, y, "d_xieta"), s.evaluate(5, x, y, "d_etaeta"))
    fd = np.array([(sg(x + h, y) - sg(x - h, y)) / (2 * h), (sg(x, y + h) - sg(x, y - h)) / (2 * h)])
    np.testing.assert_allclose(g, fd, rtol=1e-6)
