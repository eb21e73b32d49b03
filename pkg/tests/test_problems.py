import math

import mpmath as mp
import numpy as np
import pytest

from nlrb.errors import ConfigError, DomainError
from nlrb.problems import (
    burgers_exact,
    burgers_exact_dx,
    burgers_exact_dxx,
    burgers_problem,
    burgers_source_paper,
    paper_source_consistent,
    sample_params,
)


@pytest.fixture(scope="module", params=[1.0, 9.0])
def problem(request):
    return burgers_problem(request.param)


class TestExactSolution:
    def test_vanishes_at_origin_and_boundary(self, problem):
        for mu in ([5.0, 5.0], [1.0, 10.0], [9.3, 2.2]):
            mu = np.array(mu)
            assert problem.exact(np.array([0.0]), mu)[0] == 0.0
            assert np.allclose(problem.exact(np.array([-1.0, 1.0]), mu), 0.0)

    def test_direct_evaluation_kappa_one(self):
        # mu=(1,3), x=0.5: (1 + 0.5) * sin(-0.5) * (0.25 - 1)
        p = burgers_problem(1.0)
        val = p.exact(np.array([0.5]), np.array([1.0, 3.0]))[0]
        assert val == pytest.approx(1.5 * math.sin(-0.5) * (-0.75), abs=1e-15)

    def test_kappa_nine_oscillation_count(self):
        # sine factor sin(-15x) has 2*floor(15/pi)+1 = 9 roots in [-1, 1]
        x = np.linspace(-1, 1, 20000)  # even count so x=0 is not sampled
        s = np.sin(-9.0 * 5.0 * x / 3.0)
        changes = int(np.sum(s[:-1] * s[1:] < 0))
        assert changes == 9

    @pytest.mark.parametrize("kappa", [1.0, 9.0])
    def test_analytic_derivatives_match_high_precision_fd(self, kappa):
        mp.mp.dps = 30
        rng = np.random.default_rng(7)
        for _ in range(12):
            x = float(rng.uniform(-1, 1))
            mu = rng.uniform(1, 10, 2)
            f = lambda t: (1 + mu[0] * t) * mp.sin(-kappa * mu[1] * t / 3) * (t * t - 1)
            d1 = float(mp.diff(f, x))
            d2 = float(mp.diff(f, x, 2))
            a1 = burgers_exact_dx(np.array([x]), mu, kappa)[0]
            a2 = burgers_exact_dxx(np.array([x]), mu, kappa)[0]
            scale1 = max(1.0, abs(d1))
            scale2 = max(1.0, abs(d2))
            assert abs(a1 - d1) / scale1 < 1e-7
            assert abs(a2 - d2) / scale2 < 1e-7


class TestResidualOracle:
    def test_exact_solution_residual_vanishes(self, problem):
        """Transcription oracle: N[u_ex] - s below 1e-8 at 1000 random points."""
        rng = np.random.default_rng(42)
        x = rng.uniform(-1, 1, 1000)
        worst = 0.0
        for _ in range(10):
            mu = rng.uniform(1, 10, 2)
            u = problem.exact(x, mu)
            ux = problem.exact_dx(x, mu)
            uxx = problem.exact_dxx(x, mu)
            res = problem.residual(u, ux, uxx, x, mu)
            worst = max(worst, float(np.max(np.abs(res))))
        assert worst < 1e-8

    @pytest.mark.parametrize("kappa", [1.0, 9.0])
    def test_printed_source_is_inconsistent_so_fallback_engages(self, kappa):
        # The printed closed-form source disagrees with u*u_x - u_xx of the
        # exact solution by O(1e3); auto mode must select the derived source.
        assert not paper_source_consistent(kappa)
        p = burgers_problem(kappa, source_mode="auto")
        assert p.source_mode == "derived"
        rng = np.random.default_rng(3)
        x = rng.uniform(-1, 1, 64)
        mu = np.array([5.0, 5.0])
        sp = burgers_source_paper(x, mu, kappa)
        u = burgers_exact(x, mu, kappa)
        n_of_u = u * burgers_exact_dx(x, mu, kappa) - burgers_exact_dxx(x, mu, kappa)
        assert np.max(np.abs(sp - n_of_u)) > 1.0

    def test_zero_function_zero_source_residual(self, problem):
        x = np.array([0.1, -0.4])
        z = np.zeros(2)
        res = problem.c_uux * z * z + problem.c_uxx * z + problem.c_u * z
        assert np.allclose(res, 0.0)

    def test_boundary_operator_is_dirichlet(self, problem):
        xb = np.array([-1.0, 1.0])
        u = np.array([0.3, -0.2])
        assert np.allclose(problem.boundary_residual(u, xb), u)


class TestSampling:
    def test_deterministic(self, problem):
        a = sample_params(problem, 50, seed=9)
        b = sample_params(problem, 50, seed=9)
        assert np.array_equal(a, b)

    def test_uniform_mean_and_support(self, problem):
        s = sample_params(problem, 10_000, seed=1)
        assert abs(s[:, 0].mean() - 5.5) < 0.1
        assert s.min() >= 1.0 and s.max() <= 10.0

    def test_count_validated(self, problem):
        with pytest.raises(ConfigError):
            sample_params(problem, 0, seed=0)


class TestProblemValidation:
    def test_kappa_must_be_positive(self):
        with pytest.raises(ConfigError):
            burgers_problem(0.0)

    def test_mu_outside_domain(self, problem):
        with pytest.raises(DomainError):
            problem.check_mu(np.array([0.5, 5.0]))
