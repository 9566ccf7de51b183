import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gldual.dual import (
    DualPair,
    check_B_star,
    check_C_star,
    concavity_certificate,
    eval_F_star,
    eval_G_star,
    eval_J1_star,
    eval_J2_star,
    eval_J_star,
    grad_G_star_v1,
    grad_J1_star,
    lambda_branch_check,
    recover_u,
    stationarity_residual,
    v0_of_v1,
)
from gldual.errors import ConfigurationError, DomainError, InfeasibleError
from gldual.grid import inner, laplacian
from gldual.model import ModelParams

from conftest import grid1d, grid2d
from oracles import G_star_naive, bisect, central_difference, stencil_eigenvalues_1d


def box_sample(rng, p, size, frac=1.0):
    return rng.uniform(-frac * p.K2, frac * p.K2, size)


class TestMemberships:
    def test_B_star(self):
        p = ModelParams(1, 1, 1)
        ok, margin = check_B_star(p, np.full(5, -1.0))
        assert ok and margin == pytest.approx(3.0)
        assert not check_B_star(p, np.full(5, 2.0))[0]
        assert check_B_star(p, np.full(5, 2.0 - 2e-6), tol=1e-6)[0]

    def test_C_star(self):
        p = ModelParams(1, 1, 1)
        assert check_C_star(p, np.zeros(4)) == (True, pytest.approx(p.K2))
        q = ModelParams(1, 1, 1, K=8.0, K2=3.99)
        assert not check_C_star(q, np.array([0.0, 4.1]))[0]

    def test_C_star_revalidates(self):
        p = ModelParams(1, 1, 1)
        object.__setattr__(p, "K2", 4.0)
        with pytest.raises(ConfigurationError):
            check_C_star(p, np.zeros(3))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(-1.0, 1.0))
    def test_C_star_scaling(self, seed, c):
        p = ModelParams(1, 1, 1)
        v = box_sample(np.random.default_rng(seed), p, 9)
        assert check_C_star(p, c * v)[0]

    def test_checked_pair(self):
        p = ModelParams(1, 1, 1)
        pair = DualPair.checked(p, np.zeros(3), np.full(3, -1.0))
        assert pair.in_B_star and pair.in_C_star


class TestGStar:
    def test_constant_value(self):
        g = grid1d(101)
        p = ModelParams(1, 1, 1)
        m = g.weights.sum()
        assert eval_G_star(p, g, g.zeros(), g.constant(-1.0)) == pytest.approx(0.5 * m, rel=1e-14)

    def test_sup_over_constants(self):
        g = grid1d(41)
        p = ModelParams(1.0, 1.7, 0.6)
        m = g.weights.sum()
        cs = np.linspace(-3.0, p.K / 4 - 1e-3, 2001)
        vals = [eval_G_star(p, g, g.zeros(), g.constant(c)) for c in cs]
        best = int(np.argmax(vals))
        assert cs[best] == pytest.approx(-p.alpha * p.beta, abs=3e-3)
        assert eval_G_star(p, g, g.zeros(), g.constant(-p.alpha * p.beta)) == pytest.approx(
            p.alpha * p.beta**2 / 2 * m, rel=1e-13)
        assert max(vals) <= p.alpha * p.beta**2 / 2 * m + 1e-14

    @pytest.mark.parametrize("grid", [grid1d(9), grid2d(6)])
    def test_matches_naive(self, grid, rng):
        p = ModelParams(0.5, 1.3, 0.7)
        for _ in range(10):
            v1 = box_sample(rng, p, grid.size)
            v0 = rng.uniform(-3, p.K / 4 - 0.1, grid.size)
            ref = G_star_naive(grid, 1.3, 0.7, p.K, v1, v0)
            assert abs(eval_G_star(p, grid, v1, v0) - ref) <= 1e-12 * max(1, abs(ref))

    def test_domain_error(self):
        g = grid1d(7)
        p = ModelParams(1, 1, 1)
        with pytest.raises(DomainError):
            eval_G_star(p, g, g.zeros(), g.constant(p.K / 4))

    def test_partial_v1_finite_difference(self, rng):
        g = grid1d(17)
        p = ModelParams(1, 1.4, 0.9)
        for _ in range(20):
            v1 = box_sample(rng, p, g.size, 0.8)
            v0 = rng.uniform(-2, p.K / 4 - 0.5, g.size)
            d = rng.standard_normal(g.size)
            exact = inner(g, grad_G_star_v1(p, g, v1, v0), d)
            fd = central_difference(lambda x: eval_G_star(p, g, x, v0), v1, d)
            assert abs(exact - fd) <= 1e-6 * abs(exact)


class TestFStar:
    def test_zero_numerator(self, rng):
        g = grid1d(15)
        f = rng.standard_normal(g.size)
        assert eval_F_star(ModelParams(1, 1, 1, f=f), g, -f) == 0.0

    @pytest.mark.parametrize("n", [5, 8, 12])
    def test_sine_mode(self, n):
        g = grid1d(n)
        p = ModelParams(0.8, 1.0, 1.0)
        s1 = np.sin(np.pi * g.axis(0))
        mu1 = stencil_eigenvalues_1d(n - 2, g.h)[0]
        expected = 0.5 * inner(g, s1, s1) / (p.gamma * mu1 + p.K)
        assert eval_F_star(p, g, s1) == pytest.approx(expected, rel=1e-12)
        # dense eigendecomposition route
        vals, vecs = np.linalg.eigh(laplacian(g, p.gamma, p.K).toarray())
        c = vecs.T @ s1
        assert 0.5 * g.h * np.sum(c**2 / vals) == pytest.approx(expected, rel=1e-12)

    def test_convex_and_nonnegative(self, rng):
        g = grid2d(7)
        p = ModelParams(0.4, 1, 1, f=rng.standard_normal(g.size))
        for _ in range(50):
            a, b = 3 * rng.standard_normal((2, g.size))
            fa, fb = eval_F_star(p, g, a), eval_F_star(p, g, b)
            assert fa >= 0
            assert eval_F_star(p, g, 0.5 * (a + b)) <= 0.5 * (fa + fb) + 1e-12


class TestJStar:
    def test_zero_pair(self):
        g = grid1d(51)
        p = ModelParams(1, 1, 1)
        pair = DualPair(g.zeros(), g.constant(-1.0))
        assert eval_J_star(p, g, pair) == pytest.approx(0.5 * g.weights.sum(), rel=1e-14)

    def test_bounded_by_G_star(self, rng):
        g = grid1d(21)
        p = ModelParams(1, 1, 1, f=rng.standard_normal(g.size))
        for _ in range(20):
            v1 = box_sample(rng, p, g.size)
            v0 = rng.uniform(-2, 1.5, g.size)
            J = eval_J_star(p, g, DualPair(v1, v0))
            assert J <= eval_G_star(p, g, v1, v0)
            assert J == pytest.approx(-eval_F_star(p, g, v1) + G_star_naive(g, 1, 1, p.K, v1, v0),
                                      rel=1e-12, abs=1e-14)


class TestInnerRoot:
    def test_zero_v1(self):
        g = grid1d(11)
        p = ModelParams(1, 1.5, 0.4)
        np.testing.assert_allclose(v0_of_v1(p, g, g.zeros()), -0.6, rtol=0, atol=1e-15)

    def test_s16_bisection_oracle(self):
        g = grid1d(3)
        p = ModelParams(1, 1, 1)
        assert p.K == 8.0
        resid = lambda t: 16.0 / (2 * t - 8.0) ** 2 - t - 1.0  # noqa: E731
        assert resid(-1) == pytest.approx(0.16) and resid(0) == pytest.approx(-0.75)
        ref = bisect(resid, -1.0, 0.0)
        t = v0_of_v1(p, g, np.array([4.0]))[0]
        assert -1 < t < 0
        assert abs(t - ref) < 1e-12

    @pytest.mark.parametrize("grid", [grid1d(41), grid2d(9)])
    def test_plug_back(self, grid, rng):
        p = ModelParams(0.7, 1.6, 0.8)
        for _ in range(10):
            v1 = box_sample(rng, p, grid.size)
            v0 = v0_of_v1(p, grid, v1)
            assert np.max(np.abs(stationarity_residual(p, v1, v0))) < 1e-10
            assert np.all(v0 < p.K / 4)
            assert np.all(concavity_certificate(p, v1, v0) < 1 / p.alpha)

    def test_infeasible(self):
        g = grid1d(3)
        p = ModelParams(1, 1, 1)
        # at t -> K/4 the residual is s/K^2 - K/(4 alpha) - beta = s/64 - 3
        with pytest.raises(InfeasibleError):
            v0_of_v1(p, g, np.array([20.0]))

    def test_inner_maximizer(self, rng):
        g = grid1d(15)
        p = ModelParams(1, 1.2, 0.7)
        for _ in range(20):
            v1 = box_sample(rng, p, g.size)
            v0 = v0_of_v1(p, g, v1)
            best = eval_G_star(p, g, v1, v0)
            for _ in range(5):
                d = rng.uniform(-0.5, 0.5, g.size)
                trial = np.minimum(v0 + d, p.K / 4 - 1e-6)
                assert eval_G_star(p, g, v1, trial) <= best + 1e-13

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.2, 5.0), st.floats(0.2, 5.0))
    def test_property_residual(self, seed, alpha, beta):
        g = grid1d(10)
        p = ModelParams(1.0, alpha, beta)
        v1 = box_sample(np.random.default_rng(seed), p, g.size)
        v0 = v0_of_v1(p, g, v1)
        scale = 1 + np.abs(v0) / alpha + beta
        assert np.all(np.abs(stationarity_residual(p, v1, v0)) < 1e-10 * scale)
        assert np.all(v0 < p.K / 4)
        assert np.all(concavity_certificate(p, v1, v0) < 1 / alpha)


class TestJ1Star:
    def test_zero(self):
        g = grid1d(31)
        p = ModelParams(1, 2.0, 0.5)
        expected = p.alpha * p.beta**2 / 2 * g.weights.sum()
        assert eval_J1_star(p, g, g.zeros()) == pytest.approx(expected, rel=1e-13)
        assert eval_J2_star(p, g, g.zeros()) == pytest.approx(expected, rel=1e-13)

    def test_minus_f_gives_G_sup(self, rng):
        g = grid1d(21)
        p = ModelParams(1, 1, 1, f=rng.uniform(-0.5, 0.5, 19))
        v1 = -p.source(g)
        assert eval_J1_star(p, g, v1) == pytest.approx(eval_J2_star(p, g, v1), rel=1e-14)

    def test_dominates_random_v0(self, rng):
        g = grid1d(21)
        p = ModelParams(1, 1, 1, f=rng.standard_normal(g.size))
        v1 = box_sample(rng, p, g.size)
        J1 = eval_J1_star(p, g, v1)
        for _ in range(50):
            v0 = rng.uniform(-4, p.K / 4 - 1e-3, g.size)
            assert J1 >= eval_J_star(p, g, DualPair(v1, v0))

    def test_midpoint_convexity(self, rng):
        g = grid1d(25)
        p = ModelParams(1, 1, 1, f=0.1 * rng.standard_normal(g.size))
        for _ in range(100):
            a, b = box_sample(rng, p, (2, g.size))
            mid = eval_J1_star(p, g, 0.5 * (a + b))
            assert mid <= 0.5 * (eval_J1_star(p, g, a) + eval_J1_star(p, g, b)) + 1e-9

    @pytest.mark.parametrize("grid", [grid1d(21), grid2d(7)])
    def test_gradient_finite_difference(self, grid, rng):
        p = ModelParams(1, 1, 1, f=rng.standard_normal(grid.size))
        for _ in range(20):
            v1 = box_sample(rng, p, grid.size, 0.9)
            d = rng.standard_normal(grid.size)
            exact = inner(grid, grad_J1_star(p, grid, v1), d)
            fd = central_difference(lambda x: eval_J1_star(p, grid, x), v1, d)
            assert abs(exact - fd) <= 1e-6 * abs(exact)

    def test_gradient_zero_at_origin(self):
        g = grid1d(15)
        np.testing.assert_array_equal(grad_J1_star(ModelParams(1, 1, 1), g, g.zeros()), 0.0)


class TestRecovery:
    def test_zero(self):
        g = grid1d(7)
        p = ModelParams(1, 1, 1)
        np.testing.assert_array_equal(recover_u(p, g, DualPair(g.zeros(), g.constant(-1))), 0)

    def test_inverse_of_relations(self, rng):
        g = grid1d(31)
        p = ModelParams(1, 1, 1)
        u0 = rng.uniform(-1.2, 1.2, g.size)
        v0 = p.alpha * (u0**2 - p.beta)
        v1 = p.K * u0 - 2 * v0 * u0
        np.testing.assert_allclose(recover_u(p, g, DualPair(v1, v0)), u0, rtol=0, atol=1e-12)

    def test_linear_in_v1(self, rng):
        g = grid1d(13)
        p = ModelParams(1, 1, 1)
        v1 = rng.standard_normal(g.size)
        v0 = rng.uniform(-2, 1, g.size)
        np.testing.assert_allclose(recover_u(p, g, DualPair(2.5 * v1, v0)),
                                   2.5 * recover_u(p, g, DualPair(v1, v0)), rtol=1e-15)

    def test_outside_B_star(self):
        g = grid1d(5)
        p = ModelParams(1, 1, 1)
        with pytest.raises(DomainError):
            recover_u(p, g, DualPair(g.zeros(), g.constant(3.0)))


class TestBranch:
    def test_stable(self):
        g = grid1d(101)
        rep = lambda_branch_check(ModelParams(1, 1, 1), g, g.zeros())
        assert rep.lambda_is_zero
        assert rep.min_eigenvalue == pytest.approx(np.pi**2 - 2, rel=1e-3)

    def test_low_gamma(self):
        g = grid1d(101)
        rep = lambda_branch_check(ModelParams(0.01, 1, 1), g, g.zeros())
        assert not rep.lambda_is_zero and rep.min_eigenvalue < 0

    def test_shift(self, rng):
        g = grid1d(12)
        p = ModelParams(1, 1.3, 1)
        u = rng.uniform(-1, 1, g.size)
        c = 0.4
        a = lambda_branch_check(p, g, u).min_eigenvalue
        b = lambda_branch_check(p, g, np.sqrt(u**2 + c)).min_eigenvalue
        assert b - a == pytest.approx(6 * p.alpha * c, abs=1e-10)
