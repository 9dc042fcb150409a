from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levycoupling.polyalg import (
    DimensionMismatch,
    HermiteCoeffs,
    NotCentered,
    Poly,
    VecPoly,
    center_polynomials,
    gaussian_expectation,
    hermite_poly,
    hermite_to_monomial,
    lsigma_apply,
    lsigma_invert,
    monomial_to_hermite,
    multi_indices,
    poly_eval,
)


def random_poly(rng, dim, max_degree, density=0.6):
    terms = {}
    for alpha in multi_indices(dim, max_degree):
        if rng.random() < density:
            terms[alpha] = rng.uniform(-1, 1)
    return Poly(dim, terms)


def random_vecpoly(rng, dim, max_degree):
    return VecPoly([random_poly(rng, dim, max_degree) for _ in range(dim)])


seeds = st.integers(min_value=0, max_value=2**32 - 1)
dims = st.integers(min_value=1, max_value=3)


class TestPoly:
    def test_zero_poly_evaluates_to_zero(self):
        assert poly_eval(Poly.zero(2), [1.3, -2.0]) == 0.0

    def test_root(self):
        p = Poly(1, {(2,): 1.0, (0,): -1.0})
        assert poly_eval(p, [1.0]) == 0.0

    def test_product_term(self):
        p = Poly(2, {(1, 1): 2.0})
        assert poly_eval(p, [3.0, 0.5]) == pytest.approx(3.0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            poly_eval(Poly.variable(2, 0), [1.0, 2.0, 3.0])
        with pytest.raises(DimensionMismatch):
            Poly.variable(2, 0) + Poly.variable(3, 0)

    def test_canonical_zero_pruning(self):
        x = Poly.variable(1, 0)
        p = (x + 1) - x
        assert p.terms == {(0,): 1.0}
        assert (x - x).is_zero()

    def test_vectorized_eval(self):
        p = Poly(2, {(2, 0): 1.0, (0, 1): -3.0, (0, 0): 0.5})
        pts = np.array([[1.0, 2.0], [0.0, 0.0], [-2.0, 1.0]])
        np.testing.assert_allclose(p(pts), pts[:, 0] ** 2 - 3 * pts[:, 1] + 0.5)

    def test_compose_affine(self):
        p = Poly(1, {(2,): 1.0})
        q = p.affine_substitute([[2.0, 1.0]], [1.0])  # (2u + v + 1)^2
        pts = np.array([[0.3, -0.2], [1.0, 2.0]])
        np.testing.assert_allclose(q(pts), (2 * pts[:, 0] + pts[:, 1] + 1) ** 2)

    def test_text_roundtrip(self):
        rng = np.random.default_rng(0)
        p = random_poly(rng, 3, 4)
        assert Poly.from_lines(p.to_lines(), 3) == p

    def test_grad_and_is_gradient(self):
        u = Poly(2, {(2, 1): 1.0, (0, 3): 2.0})
        assert u.grad().is_gradient()
        assert not VecPoly([Poly.variable(2, 1), -Poly.variable(2, 0)]).is_gradient()

    def test_jacobian_eval(self):
        p = VecPoly([Poly(2, {(2, 0): 1.0}), Poly(2, {(1, 1): 1.0})])
        jac = p.jacobian(np.array([2.0, 3.0]))
        np.testing.assert_allclose(jac, [[4.0, 0.0], [3.0, 2.0]])


class TestHermite:
    def test_he2(self):
        p = hermite_to_monomial(HermiteCoeffs(1, {(2,): 1.0}))
        assert p.allclose(Poly(1, {(2,): 1.0, (0,): -1.0}), 1e-14)

    def test_x_squared(self):
        h = monomial_to_hermite(Poly(1, {(2,): 1.0}))
        assert h.allclose(HermiteCoeffs(1, {(2,): 1.0, (0,): 1.0}), 1e-14)

    def test_roundtrip_degree6_d3(self):
        rng = np.random.default_rng(1)
        p = random_poly(rng, 3, 6)
        assert hermite_to_monomial(monomial_to_hermite(p)).allclose(p, 1e-10)

    @settings(max_examples=30, deadline=None)
    @given(seed=seeds, dim=dims)
    def test_roundtrip_degree8(self, seed, dim):
        rng = np.random.default_rng(seed)
        p = random_poly(rng, dim, 8, density=0.3)
        assert hermite_to_monomial(monomial_to_hermite(p)).allclose(p, 1e-10)
        h = monomial_to_hermite(p)
        assert monomial_to_hermite(hermite_to_monomial(h)).allclose(h, 1e-10)

    def test_degree_preserved(self):
        rng = np.random.default_rng(2)
        p = random_poly(rng, 2, 5, density=1.0)
        assert monomial_to_hermite(p).degree == p.degree


class TestGaussianExpectation:
    def test_known_values(self):
        assert gaussian_expectation(Poly(1, {(2,): 1.0, (0,): -1.0})) == 0.0
        assert gaussian_expectation(Poly(1, {(4,): 1.0})) == 3.0
        assert gaussian_expectation(Poly(2, {(2, 2): 1.0})) == 1.0

    def test_matches_h0_coefficient(self):
        rng = np.random.default_rng(3)
        p = random_poly(rng, 3, 6)
        assert gaussian_expectation(p) == pytest.approx(monomial_to_hermite(p).coeff((0, 0, 0)), abs=1e-10)

    @pytest.mark.parametrize("seed", [10, 11, 12])
    def test_matches_monte_carlo(self, seed):
        rng = np.random.default_rng(seed)
        dim = int(rng.integers(1, 4))
        p = random_poly(rng, dim, 4)
        vals = p(rng.standard_normal((10**6, dim)))
        se = vals.std(ddof=1) / np.sqrt(vals.size)
        assert abs(vals.mean() - gaussian_expectation(p)) <= 5 * se + 1e-12


class TestLSigma:
    def test_identity_d1(self):
        got = lsigma_apply(VecPoly([Poly.variable(1, 0)]))
        assert got.allclose(Poly(1, {(0,): 1.0, (2,): -1.0}), 1e-14)

    def test_zero(self):
        assert lsigma_apply(VecPoly.zero(2)).is_zero()

    def test_swap_d2(self):
        got = lsigma_apply(VecPoly([Poly.variable(2, 1), Poly.variable(2, 0)]))
        assert got.allclose(Poly(2, {(1, 1): -2.0}), 1e-14)

    def test_invert_h2(self):
        g = Poly(1, {(2,): 1.0, (0,): -1.0})
        u, grad_u = lsigma_invert(g)
        assert grad_u.allclose(VecPoly([Poly(1, {(1,): -1.0})]), 1e-14)
        assert u.constant_term() == 0.0
        # eigenrelation L grad He_2 = -2 He_2
        assert lsigma_apply(hermite_poly((2,)).grad()).allclose(-2 * hermite_poly((2,)), 1e-14)

    def test_invert_zero(self):
        u, grad_u = lsigma_invert(Poly.zero(2))
        assert u.is_zero() and grad_u.is_zero()

    def test_not_centered(self):
        with pytest.raises(NotCentered):
            lsigma_invert(Poly(1, {(2,): 1.0}))

    @pytest.mark.parametrize("dim", [1, 2, 3])
    def test_eigenrelation_all_indices(self, dim):
        for alpha in multi_indices(dim, 8, min_degree=1):
            h = hermite_poly(alpha)
            assert lsigma_apply(h.grad()).allclose(-sum(alpha) * h, 1e-10), alpha

    @settings(max_examples=40, deadline=None)
    @given(seed=seeds, dim=dims, degree=st.integers(min_value=0, max_value=6))
    def test_range_is_centered(self, seed, dim, degree):
        p = random_vecpoly(np.random.default_rng(seed), dim, degree)
        assert abs(gaussian_expectation(lsigma_apply(p))) <= 1e-9

    @settings(max_examples=40, deadline=None)
    @given(seed=seeds, dim=dims, degree=st.integers(min_value=0, max_value=5))
    def test_invert_roundtrip(self, seed, dim, degree):
        g = lsigma_apply(random_vecpoly(np.random.default_rng(seed), dim, degree))
        _, grad_u = lsigma_invert(g)
        assert grad_u.is_gradient()
        assert lsigma_apply(grad_u).allclose(g, 1e-9)


class TestCenter:
    def test_already_centered(self):
        s = [Poly(1, {(2,): 1.0, (0,): -1.0})]
        out, beta = center_polynomials(s, 0.3, 1)
        assert out == s and beta == 0.0

    def test_shift(self):
        out, beta = center_polynomials([Poly(1, {(2,): 1.0})], 0.1, 1)
        assert out[0].allclose(Poly(1, {(2,): 1.0, (0,): -1.0}))
        assert beta == pytest.approx(0.1)

    def test_empty(self):
        assert center_polynomials([], 0.5, 1) == ([], 0.0)

    def test_outputs_centered(self):
        rng = np.random.default_rng(4)
        out, _ = center_polynomials([random_poly(rng, 2, 4) for _ in range(3)], 0.2, 2)
        assert all(abs(gaussian_expectation(s)) < 1e-12 for s in out)
