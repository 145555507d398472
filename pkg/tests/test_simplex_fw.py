import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_pmf
from oracles import central_difference, projected_gradient, random_psd
from kmlearn.simplex_fw import (
    FwConfig,
    SimplexQpProblem,
    check_pmf,
    frank_wolfe,
    fw_gap,
    fw_gradient,
    lp_on_simplex,
    solve_simplex_qp,
)


def _random_problem(rng, D, lam=None):
    lam = float(rng.choice([0.0, rng.uniform(0, 2)])) if lam is None else lam
    return SimplexQpProblem(random_psd(rng, D), rng.random(D) * D, lam)


class TestLpOnSimplex:
    def test_minimum_entry(self):
        assert lp_on_simplex([3, 1, 2]) == 1

    def test_tie_lowest_index(self):
        assert lp_on_simplex([5, 5, 5]) == 0
        assert lp_on_simplex([2, 0, 0, 1]) == 1

    def test_matches_vertex_enumeration(self, rng):
        for _ in range(1000):
            c = rng.standard_normal(10)
            j = lp_on_simplex(c)
            vertices = np.eye(10)
            assert np.all(c @ vertices[j] <= vertices @ c)

    def test_empty(self):
        with pytest.raises(ValueError):
            lp_on_simplex([])


class TestGradient:
    def test_identity_uniform(self):
        D = 4
        p = SimplexQpProblem(np.eye(D), np.zeros(D))
        np.testing.assert_allclose(fw_gradient(p, np.full(D, 1 / D)), np.full(D, 2 / D))

    def test_finite_differences(self, rng):
        for _ in range(100):
            D = int(rng.integers(1, 12))
            p = _random_problem(rng, D)
            theta = random_pmf(rng, D)
            g = fw_gradient(p, theta)
            fd = central_difference(lambda x: x @ p.Q_reg @ x - 2 * x @ p.r, theta)
            assert np.linalg.norm(g - fd) <= 1e-6 * max(np.linalg.norm(g), 1e-12)

    def test_lambda_adds_two_lambda_theta(self, rng):
        p0 = _random_problem(rng, 5, lam=0.0)
        p1 = SimplexQpProblem(p0.Q, p0.r, 0.7)
        theta = random_pmf(rng, 5)
        np.testing.assert_allclose(fw_gradient(p1, theta) - fw_gradient(p0, theta), 1.4 * theta, atol=1e-14)

    def test_dimension_mismatch(self):
        p = SimplexQpProblem(np.eye(3), np.zeros(3))
        with pytest.raises(ValueError, match="dimension mismatch"):
            fw_gradient(p, np.ones(2) / 2)


class TestGap:
    def test_zero_at_symmetric_optimum(self):
        p = SimplexQpProblem(np.eye(5), np.zeros(5))
        assert fw_gap(p, np.full(5, 0.2)) == pytest.approx(0.0, abs=1e-15)

    def test_vertex_example(self):
        p = SimplexQpProblem(np.eye(2), np.zeros(2))
        assert fw_gap(p, np.array([1.0, 0.0])) == pytest.approx(2.0)

    def test_bounds_suboptimality_d2(self, rng):
        # on a segment f(t e1 + (1-t) e2) is a 1-d quadratic; minimize in closed form
        for _ in range(200):
            p = _random_problem(rng, 2)
            Qr, r = p.Q_reg, p.r
            a = Qr[0, 0] - 2 * Qr[0, 1] + Qr[1, 1]
            b = 2 * (Qr[0, 1] - Qr[1, 1]) - 2 * (r[0] - r[1])
            ts = [0.0, 1.0] + ([float(np.clip(-b / (2 * a), 0, 1))] if a > 0 else [])
            f_star = min(p.value(np.array([t, 1 - t])) for t in ts)
            theta = random_pmf(rng, 2)
            assert fw_gap(p, theta) >= p.value(theta) - f_star - 1e-12

    @given(st.integers(1, 10), st.integers(0, 2**32 - 1))
    def test_nonnegative(self, D, seed):
        rng = np.random.default_rng(seed)
        assert fw_gap(_random_problem(rng, D), random_pmf(rng, D)) >= -1e-12


class TestSolve:
    def test_identity_converges_to_uniform(self, rng):
        D = 6
        p = SimplexQpProblem(np.eye(D), np.zeros(D))
        theta = solve_simplex_qp(p, random_pmf(rng, D), FwConfig(max_iters=100_000))
        np.testing.assert_allclose(theta, np.full(D, 1 / D), atol=1e-4)

    def test_diag_example(self):
        p = SimplexQpProblem(np.diag([1.0, 2.0]), np.zeros(2))
        res = frank_wolfe(p, np.array([0.5, 0.5]), FwConfig(epsilon=1e-12, max_iters=10_000))
        np.testing.assert_allclose(res.theta, [2 / 3, 1 / 3], atol=1e-3)
        assert res.value == pytest.approx(2 / 3, abs=1e-5)
        assert res.iters <= 10_000

    def test_matches_projected_gradient(self, rng):
        n, D = 10, 10
        probs = [_random_problem(rng, D) for _ in range(n)]
        _, f_pg = projected_gradient(np.array([p.Q_reg for p in probs]), np.array([p.r for p in probs]), 20_000)
        cfg = FwConfig(max_iters=10**7, gap_tol=1e-7)
        for p, f_ref in zip(probs, f_pg):
            res = frank_wolfe(p, np.full(D, 1 / D), cfg)
            assert res.value <= f_ref + 1e-5
            assert res.gap <= 1e-7 + 1e-12

    @given(st.integers(1, 8), st.integers(1, 300), st.integers(0, 2**32 - 1))
    def test_result_on_simplex_and_no_worse(self, D, iters, seed):
        rng = np.random.default_rng(seed)
        p = _random_problem(rng, D)
        theta0 = random_pmf(rng, D)
        res = frank_wolfe(p, theta0, FwConfig(max_iters=iters))
        check_pmf(res.theta)
        assert abs(res.theta.sum() - 1) <= 1e-9
        assert res.value <= p.value(theta0)

    def test_iterates_stay_on_simplex(self, rng):
        p = _random_problem(rng, 7)
        theta = random_pmf(rng, 7)
        for _ in range(50):
            theta = frank_wolfe(p, theta, FwConfig(max_iters=37)).theta
            assert abs(theta.sum() - 1) <= 1e-9 and theta.min() >= 0

    def test_sublinear_rate(self, rng):
        # k * (f_k - f*) stays bounded
        p = _random_problem(rng, 8, lam=0.0)
        f_star = frank_wolfe(p, np.full(8, 1 / 8), FwConfig(epsilon=1e-14, max_iters=2_000_000)).value
        scaled = []
        for k in (10, 100, 1000, 10_000):
            res = frank_wolfe(p, np.full(8, 1 / 8), FwConfig(epsilon=1e-14, max_iters=k))
            scaled.append(k * (res.value - f_star))
        assert max(scaled) <= 10 * max(scaled[0], 1e-12) + 1.0

    def test_resume_continues_schedule(self, rng):
        p = _random_problem(rng, 5)
        theta0 = random_pmf(rng, 5)
        cfg = FwConfig(epsilon=1e-14, max_iters=400)
        one = frank_wolfe(p, theta0, FwConfig(epsilon=1e-14, max_iters=800))
        half = frank_wolfe(p, theta0, cfg)
        two = frank_wolfe(p, half.theta, cfg, k0=half.k)
        assert two.k == one.k == 800
        np.testing.assert_allclose(two.theta, one.theta, atol=1e-12)

    def test_gap_stop(self, rng):
        p = _random_problem(rng, 5)
        res = frank_wolfe(p, np.full(5, 0.2), FwConfig(max_iters=10**7, gap_tol=1e-4))
        assert res.gap <= 1e-4
        assert res.iters < 10**7

    def test_invalid_start(self):
        p = SimplexQpProblem(np.eye(2), np.zeros(2))
        with pytest.raises(ValueError, match="simplex"):
            solve_simplex_qp(p, np.array([0.7, 0.7]))
        with pytest.raises(ValueError, match="dimension"):
            solve_simplex_qp(p, np.ones(3) / 3)


class TestProblemValidation:
    def test_asymmetric(self):
        with pytest.raises(ValueError, match="symmetric"):
            SimplexQpProblem(np.array([[1.0, 2.0], [0.0, 1.0]]), np.zeros(2))

    def test_negative_lambda(self):
        with pytest.raises(ValueError):
            SimplexQpProblem(np.eye(2), np.zeros(2), -1.0)

    def test_config(self):
        with pytest.raises(ValueError):
            FwConfig(epsilon=0)
        with pytest.raises(ValueError):
            FwConfig(max_iters=0)
