import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import projected_sphere
from gsiga.assembly import QuadratureGrid, l2_project
from gsiga.errors import CapacityError, InvalidArgument
from gsiga.refinement import baselines, compute_indicators, mark, refine
from gsiga.space import SplineSpace, global_prolongation, level_map
from gsiga.topology import FACES

GRID = np.linspace(0.0, 1.0, 9)
XX, YY = np.meshgrid(GRID, GRID, indexing="ij")


def sample(space, coeffs):
    return np.stack([space.evaluate(coeffs, f, XX, YY) for f in range(6)])


def cube_net(space):
    return l2_project(lambda f, x, y: FACES[f].cube_point(x, y), QuadratureGrid(space), tol=1e-13)


# -- hierarchical space -----------------------------------------------------------


def test_uniform_extraction_is_gluing():
    s = SplineSpace.uniform(5, 2)
    diff = s.extraction - level_map(5, 2, 0).gluing
    assert abs(diff).max() == 0.0


def test_refine_everything_is_uniform_prolongation():
    s = SplineSpace.uniform(6, 2)
    new, R = s.refine(np.arange(s.num_dofs))
    assert new.num_dofs == level_map(6, 2, 1).num_global == 6 * 10**2 - 12 * 10 + 8
    assert abs(R - global_prolongation(6, 2, 0)).max() < 1e-14


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 3), st.data())
def test_refinement_preserves_functions(p, data):
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    s = SplineSpace.uniform(p + 3, p, max_level=2)
    c = rng.normal(size=(s.num_dofs, 3))
    before = sample(s, c)
    for _ in range(2):
        free = np.flatnonzero(s.dof_levels() < s.max_level)
        k = data.draw(st.integers(1, min(8, free.size)))
        marked = rng.choice(free, size=k, replace=False)
        new, [c] = refine(s, marked, c)
        assert new.num_dofs > s.num_dofs
        s = new
    assert np.max(np.abs(sample(s, c) - before)) < 1e-10


def test_refine_nothing_is_identity():
    s = SplineSpace.uniform(5, 2)
    new, R = s.refine([])
    assert new is s and R.shape == (s.num_dofs, s.num_dofs)


def test_capacity_error_at_depth_cap():
    s = SplineSpace.uniform(4, 1, max_level=1)
    s1, _ = s.refine([0])
    top = np.flatnonzero(s1.dof_levels() == 1)
    with pytest.raises(CapacityError):
        s1.refine(top[:1])


def test_marked_out_of_range():
    s = SplineSpace.uniform(4, 1)
    with pytest.raises(InvalidArgument):
        s.refine([s.num_dofs])


def test_equality_tracks_domains():
    a = SplineSpace.uniform(5, 2)
    b, _ = a.refine([7])
    c, _ = a.refine([7])
    assert b == c and a != b


# -- indicators -------------------------------------------------------------------


def test_cell_indicator_on_the_cube_is_constant():
    # the faces are affine images of [0,1]^2 with side 2, so sqrt(g) = 4
    s = SplineSpace.uniform(5, 2)
    ind = compute_indicators(QuadratureGrid(s), cube_net(s))
    np.testing.assert_allclose(ind.mu, 4.0, rtol=1e-10)
    inner = ind.curvature_applicable
    assert inner.any() and np.all(np.isnan(ind.kappa[s.is_interface]))
    np.testing.assert_allclose(ind.kappa[inner], 0.0, atol=1e-10)


def test_scaling_the_surface_scales_indicators():
    s, q, e = projected_sphere(10, 3)
    a = compute_indicators(q, e)
    b = compute_indicators(q, 2.0 * e)
    np.testing.assert_allclose(b.mu, 4.0 * a.mu, rtol=1e-12)
    m = a.curvature_applicable
    np.testing.assert_allclose(b.kappa[m], a.kappa[m] / 4.0, rtol=1e-10)


def test_sphere_curvature_indicator():
    R = 40.0
    s, q, e = projected_sphere(10, 3, R)
    k = compute_indicators(q, e).kappa
    np.testing.assert_allclose(k[~np.isnan(k)], 2.0 / R**2, rtol=1e-2)


def test_linear_basis_has_no_curvature_indicator():
    s, q, e = projected_sphere(5, 1)
    ind = compute_indicators(q, e)
    assert not ind.curvature_applicable.any()
    assert baselines(ind).mu_curve == np.inf


@pytest.mark.parametrize("n, p", [(12, 2), (10, 3)])
def test_initial_sphere_marks_nothing(n, p):
    s, q, e = projected_sphere(n, p)
    ind = compute_indicators(q, e)
    assert mark(ind, baselines(ind)).size == 0
    assert mark(ind, baselines(ind), 2.0, 2.0).size == 0
    assert ind.mu.max() / ind.mu.mean() < 2.0


def test_flat_faces_never_fire_curvature():
    s = SplineSpace.uniform(6, 3)
    ind = compute_indicators(QuadratureGrid(s), cube_net(s))
    base = baselines(ind)
    assert base.mu_curve < 1e-20
    for k in (1.0001, 4.0, 100.0):
        assert mark(ind, base, 1e9, k).size == 0


def test_mark_flags_only_the_bulge():
    # push the control points around the north pole outward so the local
    # area grows well past k_cell times the mean
    s, q, e = projected_sphere(10, 3)
    base = baselines(compute_indicators(q, e))
    bump = np.exp(-np.sum((e - [0.0, 0.0, 40.0]) ** 2, axis=1) / 10.0**2)
    blown = e * (1.0 + 2.0 * bump)[:, None]
    marked = mark(compute_indicators(q, blown), base, k_curve=1e9)
    assert marked.size > 0
    assert np.all(e[marked, 2] > 25.0)
