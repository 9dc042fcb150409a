from __future__ import annotations

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from levycoupling.perturb import (
    DensityExpansion,
    NoConvergence,
    PerturbationSeries,
    _rho_jacobian,
    rho_apply,
    rho_invert,
    smap_forward,
    smap_inverse,
    trivial_coupling_distance,
    validate_expansion,
)
from levycoupling.polyalg import NotCentered, Poly, VecPoly, gaussian_expectation, multi_indices


def x1():
    return VecPoly([Poly.variable(1, 0)])


def scaling(eps):
    return PerturbationSeries(eps, [x1()], 1)


def random_gradient(rng, dim, degree):
    """Gradient field of the given degree with coefficients in [-1, 1]."""
    terms = {a: rng.uniform(-1, 1) / max(a) for a in multi_indices(dim, degree + 1, min_degree=2)}
    return Poly(dim, terms).grad()


class TestRho:
    def test_scaling(self):
        assert rho_apply(scaling(0.1), [2.0]) == pytest.approx([2.2])

    def test_eps_zero(self):
        s = scaling(0.0)
        assert rho_apply(s, [1.7]) == pytest.approx([1.7])
        assert rho_invert(s, [1.7]) == pytest.approx([1.7])

    def test_two_terms(self):
        s = PerturbationSeries(0.1, [x1(), x1()], 1)
        assert rho_apply(s, [1.0]) == pytest.approx([1.11])

    def test_invert_scaling(self):
        assert rho_invert(scaling(0.1), [2.2], tol=1e-12) == pytest.approx([2.0], abs=1e-12)

    def test_rejects_non_gradient(self):
        rot = VecPoly([Poly.variable(2, 1), -Poly.variable(2, 0)])
        with pytest.raises(ValueError):
            PerturbationSeries(0.1, [rot], 2)

    def test_no_convergence(self):
        # x + eps x^2 never goes below -1/(4 eps)
        p = VecPoly([Poly(1, {(2,): 1.0})])
        with pytest.raises(NoConvergence):
            rho_invert(PerturbationSeries(0.5, [p], 1), [-10.0], max_iter=20)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), dim=st.integers(1, 3))
    def test_roundtrip(self, seed, dim):
        rng = np.random.default_rng(seed)
        series = PerturbationSeries(rng.uniform(0, 0.05), [random_gradient(rng, dim, 3) for _ in range(2)], dim)
        x = rng.uniform(-3, 3, size=dim)
        y = rho_apply(series, x)
        # points on a folded sheet have no locally unique preimage
        assume(np.linalg.det(_rho_jacobian(series, x)) > 0)
        got = rho_invert(series, y, tol=1e-12)
        assert np.max(np.abs(rho_apply(series, got) - y)) <= 1e-12
        np.testing.assert_allclose(got, x, atol=1e-9)

    def test_batched_invert(self):
        rng = np.random.default_rng(5)
        series = PerturbationSeries(0.01, [random_gradient(rng, 2, 3)], 2)
        x = rng.uniform(-3, 3, size=(50, 2))
        np.testing.assert_allclose(rho_invert(series, rho_apply(series, x)), x, atol=1e-9)


class TestSMap:
    def test_scaling_first_order(self):
        (S1,) = smap_forward([x1()], 1)
        assert S1.allclose(Poly(1, {(2,): 1.0, (0,): -1.0}), 1e-12)

    def test_scaling_second_order(self):
        S1, S2 = smap_forward([x1()], 2)
        assert S2.allclose(Poly(1, {(4,): 0.5, (2,): -2.5, (0,): 1.0}), 1e-12)
        assert abs(gaussian_expectation(S2)) < 1e-12

    def test_zero(self):
        assert all(s.is_zero() for s in smap_forward([VecPoly.zero(2)] * 2, 2))
        assert all(p.is_zero() for p in smap_inverse([Poly.zero(2)] * 2, 2))

    def test_inverse_scaling(self):
        (p1,) = smap_inverse([Poly(1, {(2,): 1.0, (0,): -1.0})], 1)
        assert p1.allclose(x1(), 1e-12)

    def test_first_order_is_minus_l(self):
        from levycoupling.polyalg import lsigma_apply

        rng = np.random.default_rng(7)
        p1 = random_gradient(rng, 2, 3)
        (S1,) = smap_forward([p1], 1)
        assert S1.allclose(-lsigma_apply(p1), 1e-12)

    def test_not_centered(self):
        with pytest.raises(NotCentered):
            smap_inverse([Poly(1, {(2,): 1.0})], 1)

    def test_matches_exact_density(self):
        # law of (1+eps)Z is N(0, (1+eps)^2); compare expansion pointwise
        eps = 1e-3
        S = smap_forward([x1()], 2)
        y = np.linspace(-3, 3, 13)
        exact = np.exp(-0.5 * (y / (1 + eps)) ** 2 + 0.5 * y**2) / (1 + eps)
        approx = 1 + eps * S[0](y[:, None]) + eps**2 * S[1](y[:, None])
        np.testing.assert_allclose(approx, exact, atol=50 * eps**3)

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), dim=st.integers(1, 2), n=st.integers(1, 3))
    def test_roundtrip(self, seed, dim, n):
        rng = np.random.default_rng(seed)
        p = [random_gradient(rng, dim, int(rng.integers(1, 5))) for _ in range(n)]
        S = smap_forward(p, n)
        for s in S:
            assert abs(gaussian_expectation(s)) <= 1e-9
        back = smap_inverse(S, n)
        for a, b in zip(back, p):
            assert a.allclose(b, 1e-8)


class TestValidate:
    def test_eps_zero(self):
        rep = validate_expansion(scaling(0.0), 1, 10**4, np.random.default_rng(0))
        assert np.all(np.abs(rep.discrepancy) <= 4 * rep.stderr + 1e-12)

    def test_scaling_first_order_y2(self):
        rep = validate_expansion(scaling(0.05), 1, 10**5, np.random.default_rng(1))
        k = rep.monomials.index((2,))
        assert rep.discrepancy[k] == pytest.approx(0.05**2, abs=4 * rep.stderr[k] + 1e-12)

    def test_scaling_second_order_y2(self):
        rep = validate_expansion(scaling(0.05), 2, 10**5, np.random.default_rng(2))
        k = rep.monomials.index((2,))
        assert abs(rep.discrepancy[k]) <= 4 * rep.stderr[k] + 1e-12

    def test_needs_samples(self):
        with pytest.raises(ValueError):
            validate_expansion(scaling(0.1), 1, 100, np.random.default_rng(0))

    def test_density_expansion_rejects_uncentered(self):
        with pytest.raises(NotCentered):
            DensityExpansion((Poly(1, {(2,): 1.0}),), 0.1, 1, 1)


class TestTrivialCoupling:
    def test_eps_zero(self):
        est, se = trivial_coupling_distance(scaling(0.0), 2, 1000, np.random.default_rng(0))
        assert est == 0.0 and se == 0.0

    def test_scaling(self):
        est, se = trivial_coupling_distance(scaling(0.1), 2, 10**5, np.random.default_rng(1))
        assert est == pytest.approx(0.1, abs=4 * se)

    def test_linear_in_eps(self):
        a, _ = trivial_coupling_distance(scaling(0.05), 1, 10**4, np.random.default_rng(3))
        b, _ = trivial_coupling_distance(scaling(0.1), 1, 10**4, np.random.default_rng(3))
        assert b == pytest.approx(2 * a, rel=1e-12)
