import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import Polynomial

from gsiga.errors import InvalidArgument, OutOfDomain
from gsiga.spline import (
    KnotVector,
    TensorBasis,
    UnivariateBasis,
    eval_basis,
    make_open_uniform_knots,
    uniform_refine,
)

from conftest import naive_cox_de_boor


def basis(n, p):
    return UnivariateBasis(make_open_uniform_knots(n, p))


def full_values(b, x, order=0):
    first, vals = eval_basis(b, x, order)
    out = np.zeros(b.n)
    out[first:first + b.degree + 1] = vals
    return out


class TestKnots:
    def test_n5_p2(self):
        kv = make_open_uniform_knots(5, 2)
        np.testing.assert_allclose(kv.knots, [0, 0, 0, 1 / 3, 2 / 3, 1, 1, 1])
        assert kv.n == 5

    def test_single_linear_element(self):
        kv = make_open_uniform_knots(2, 1)
        np.testing.assert_array_equal(kv.knots, [0, 0, 1, 1])
        assert kv.num_spans == 1

    def test_n10_p3_seven_spans(self):
        kv = make_open_uniform_knots(10, 3)
        assert len(kv) == 14
        np.testing.assert_allclose(kv.knots[4:10], np.arange(1, 7) / 7)
        assert kv.num_spans == 7

    @pytest.mark.parametrize("n,p", [(2, 2), (0, 0), (3, 5)])
    def test_too_few_functions(self, n, p):
        with pytest.raises(InvalidArgument):
            make_open_uniform_knots(n, p)

    def test_rejects_decreasing(self):
        with pytest.raises(InvalidArgument):
            KnotVector([0, 0, 0.6, 0.4, 1, 1], 1)


class TestEvalBasis:
    def test_degree_zero_indicator(self):
        b = basis(4, 0)
        for x, k in [(0.1, 0), (0.3, 1), (0.5, 2), (0.99, 3), (1.0, 3)]:
            np.testing.assert_array_equal(full_values(b, x), np.eye(4)[k])

    def test_hat_midpoint(self):
        b = UnivariateBasis(KnotVector([0, 0, 0.5, 1, 1], 1))
        first, vals = eval_basis(b, 0.25)
        assert first == 0
        np.testing.assert_allclose(vals, [0.5, 0.5])

    def test_partition_of_unity_random(self, rng):
        b = basis(10, 3)
        for x in rng.uniform(0, 1, 100):
            _, vals = eval_basis(b, x)
            assert len(vals) == 4
            assert abs(vals.sum() - 1) < 1e-12
            assert vals.min() >= -1e-14

    @pytest.mark.parametrize("x", [-1e-9, 1.0 + 1e-9, np.nan])
    def test_out_of_domain(self, x):
        with pytest.raises(OutOfDomain):
            eval_basis(basis(5, 2), x)

    @pytest.mark.parametrize("n,p", [(5, 1), (7, 2), (10, 3), (6, 4)])
    def test_matches_naive_recursion(self, n, p, rng):
        b = basis(n, p)
        xs = np.concatenate([rng.uniform(0, 1, 40), b.knot_vector.breaks])
        for x in xs:
            expect = np.array([naive_cox_de_boor(b.knots, p, i, x) for i in range(n)])
            np.testing.assert_allclose(full_values(b, x), expect, atol=1e-14)

    def test_support(self, rng):
        b = basis(10, 3)
        t = b.knots
        for x in rng.uniform(0, 1, 200):
            vals = full_values(b, x)
            for i in range(b.n):
                if x < t[i] or x > t[i + 4]:
                    assert vals[i] == 0.0

    @pytest.mark.parametrize("n,p", [(8, 2), (10, 3)])
    def test_first_derivative_finite_difference(self, n, p, rng):
        b = basis(n, p)
        h = 1e-6
        breaks = b.knot_vector.breaks
        for x in rng.uniform(0.01, 0.99, 50):
            if np.min(np.abs(breaks - x)) < 1e-4:
                continue
            d = full_values(b, x, 1)
            fd = (full_values(b, x + h) - full_values(b, x - h)) / (2 * h)
            scale = np.max(np.abs(d))
            np.testing.assert_allclose(fd, d, rtol=1e-6, atol=1e-6 * scale)

    def test_second_derivative_finite_difference(self, rng):
        b = basis(10, 3)
        h = 1e-6
        breaks = b.knot_vector.breaks
        for x in rng.uniform(0.01, 0.99, 50):
            if np.min(np.abs(breaks - x)) < 1e-4:
                continue
            d2 = full_values(b, x, 2)
            fd = (full_values(b, x + h, 1) - full_values(b, x - h, 1)) / (2 * h)
            scale = np.max(np.abs(d2))
            np.testing.assert_allclose(fd, d2, rtol=1e-6, atol=1e-6 * scale)

    @pytest.mark.parametrize("p", [2, 3, 4])
    def test_continuity_across_simple_knots(self, p):
        # fit the polynomial piece on each side and compare derivatives at the knot
        b = basis(p + 5, p)
        for knot in b.knot_vector.breaks[1:-1]:
            h = 1.0 / (b.n - p)
            left = np.linspace(knot - 0.9 * h, knot - 0.1 * h, p + 3)
            right = np.linspace(knot + 0.1 * h, knot + 0.9 * h, p + 3)
            VL = np.array([full_values(b, x) for x in left])
            VR = np.array([full_values(b, x) for x in right])
            for i in range(b.n):
                pl = Polynomial.fit(left, VL[:, i], p)
                pr = Polynomial.fit(right, VR[:, i], p)
                for k in range(p):
                    a, c = pl.deriv(k)(knot), pr.deriv(k)(knot)
                    assert abs(a - c) < 1e-10 * max(1.0, abs(a)) * (b.n - p) ** k


@settings(max_examples=60, deadline=None)
@given(
    p=st.integers(0, 4),
    extra=st.integers(0, 12),
    x=st.floats(0.0, 1.0, allow_nan=False),
)
def test_partition_of_unity_property(p, extra, x):
    b = basis(p + 1 + extra, p)
    _, vals = eval_basis(b, x)
    assert abs(vals.sum() - 1.0) < 1e-12
    assert vals.min() >= -1e-14


class TestRefine:
    def test_linear_single_element(self):
        fine, T = uniform_refine(basis(2, 1))
        np.testing.assert_array_equal(fine.knots, [0, 0, 0.5, 1, 1])
        np.testing.assert_allclose(T.matrix.toarray(), [[1, 0], [0.5, 0.5], [0, 1]])

    def test_linear_single_element_by_sampling(self):
        # oracle: fine coefficients of coarse hat = its values at fine nodes
        coarse = basis(2, 1)
        fine, T = uniform_refine(coarse)
        nodes = [0.0, 0.5, 1.0]
        expect = np.array([full_values(coarse, x) for x in nodes])
        np.testing.assert_allclose(T.matrix.toarray(), expect)

    def test_constants_preserved(self):
        _, T = uniform_refine(basis(10, 3))
        np.testing.assert_allclose(T(np.ones(10)), 1.0, atol=1e-15)

    @pytest.mark.parametrize("n,p", [(10, 3), (5, 2), (6, 1), (4, 0)])
    def test_pointwise_equivalence(self, n, p, rng):
        coarse = basis(n, p)
        fine, T = uniform_refine(coarse)
        assert fine.knot_vector.num_spans == 2 * coarse.knot_vector.num_spans
        assert set(coarse.knot_vector.breaks) <= set(fine.knot_vector.breaks)
        c = rng.normal(size=n)
        cf = T(c)
        xs = rng.uniform(0, 1, 50)
        vc = np.array([full_values(coarse, x) @ c for x in xs])
        vf = np.array([full_values(fine, x) @ cf for x in xs])
        assert np.max(np.abs(vc - vf)) < 1e-12


class TestTensor:
    def test_product_and_ordering(self, rng):
        bx, by = basis(6, 2), basis(5, 3)
        tb = TensorBasis(bx, by)
        x, y = rng.uniform(0, 1, 2)
        idx, vals = tb.eval(x, y, nders=1)
        full = np.zeros(tb.n)
        full[idx] = vals[0, 0]
        expect = np.outer(full_values(bx, x), full_values(by, y)).ravel()
        np.testing.assert_array_equal(full, expect)
        assert tb.index(2, 3) == 2 * 5 + 3
        dfull = np.zeros(tb.n)
        dfull[idx] = vals[1, 0]
        np.testing.assert_allclose(dfull, np.outer(full_values(bx, x, 1), full_values(by, y)).ravel())
        assert abs(full.sum() - 1) < 1e-12

    def test_refine_pointwise(self, rng):
        tb = TensorBasis(basis(5, 2), basis(5, 2))
        fine, T = tb.refine()
        c = rng.normal(size=tb.n)
        cf = T(c)
        for x, y in rng.uniform(0, 1, (20, 2)):
            i0, v0 = tb.eval(x, y)
            i1, v1 = fine.eval(x, y)
            assert abs(v0[0, 0] @ c[i0] - v1[0, 0] @ cf[i1]) < 1e-12
