"""Tests for the independent verification machinery."""

import numpy as np
import pytest

from crb_sbl import bounds, estimators as est, model, oracle


def small_config(seed=3):
    rng = np.random.default_rng(seed)
    phi = model.sample_measurement_matrix(5, 3, seed).entries
    gamma = rng.gamma(2.0, 0.5, 3) + 0.2
    xi = float(rng.uniform(0.2, 0.8))
    return phi, gamma, xi


class TestScore:
    def test_scalar_reference(self):
        s = oracle.score_gamma_xi(np.array([2.0]), np.array([[1.0]]), np.ones(1), 1.0)
        assert s[0] == pytest.approx(0.25, abs=1e-12)

    def test_zero_matrix_gamma_scores_vanish(self):
        s = oracle.score_gamma_xi(np.ones(4), np.zeros((4, 2)), np.ones(2), 1.0)
        np.testing.assert_array_equal(s[:2], 0.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_finite_differences(self, seed):
        phi, gamma, xi = small_config(seed)
        y = np.random.default_rng(seed + 50).normal(size=5)
        s = oracle.score_gamma_xi(y, phi, gamma, xi)
        h = 1e-6
        fd = np.zeros(4)
        for j in range(3):
            up, dn = gamma.copy(), gamma.copy()
            up[j] += h
            dn[j] -= h
            fd[j] = (
                est.marginal_log_likelihood(y, phi, up, xi)
                - est.marginal_log_likelihood(y, phi, dn, xi)
            ) / (2 * h)
        fd[3] = (
            est.marginal_log_likelihood(y, phi, gamma, xi + h)
            - est.marginal_log_likelihood(y, phi, gamma, xi - h)
        ) / (2 * h)
        np.testing.assert_allclose(s, fd, rtol=1e-6, atol=1e-8)


class TestRegularity:
    def test_valid_model_passes(self):
        phi, gamma, xi = small_config(1)
        report = oracle.regularity_check(phi, gamma, xi, 100_000, seed=9)
        assert report.passed
        assert report.target == "zero-mean-score"

    def test_perturbed_model_fails(self):
        # Scores evaluated at a 10% perturbed gamma no longer have zero mean.
        phi, gamma, xi = small_config(1)
        cov = bounds.marginal_covariance(phi, gamma * 1.1, xi)
        ys = oracle._sample_observations(cov, 100_000, seed=12)
        scores = oracle._score_batch(ys, phi, gamma, xi)
        mean = scores.mean(axis=0)
        se = scores.std(axis=0, ddof=1) / np.sqrt(len(ys))
        assert np.max(np.abs(mean) / se) > 3.0

    def test_requires_minimum_samples(self):
        phi, gamma, xi = small_config(1)
        with pytest.raises(ValueError):
            oracle.regularity_check(phi, gamma, xi, 10, seed=0)


class TestMcFim:
    def test_gamma_block_within_tolerance(self):
        phi, gamma, xi = small_config(2)
        report = oracle.mc_fim(phi, gamma, xi, 100_000, seed=21, target="gamma")
        assert report.passed and report.rel_error <= 0.05

    def test_joint_block_within_tolerance(self):
        phi, gamma, xi = small_config(2)
        report = oracle.mc_fim(phi, gamma, xi, 100_000, seed=22, target="gamma-xi")
        assert report.passed

    def test_sample_scaling_shrinks_std_error(self):
        phi, gamma, xi = small_config(4)
        r1 = oracle.mc_fim(phi, gamma, xi, 20_000, seed=5)
        r2 = oracle.mc_fim(phi, gamma, xi, 40_000, seed=5)
        assert r2.std_error == pytest.approx(r1.std_error / np.sqrt(2.0), rel=0.15)

    def test_orthogonal_columns_offdiagonals_near_zero(self):
        phi = np.array([[1.0, 1.0], [1.0, -1.0], [1.0, 1.0], [1.0, -1.0]])
        gamma = np.array([0.7, 1.4])
        report = oracle.mc_fim(phi, gamma, 0.5, 50_000, seed=6, target="gamma")
        scores_offdiag = report.estimate[0, 1]
        # Exact zero in the closed form; MC estimate within a loose band.
        assert report.closed_form[0, 1] == pytest.approx(0.0, abs=1e-12)
        assert abs(scores_offdiag) < 0.05 * np.max(np.abs(report.closed_form))

    def test_wrong_prefactor_detected(self):
        # An information matrix with the doubled prefactor (2 instead of 1/2
        # on the squared column products) must fail the 5% check.
        phi, gamma, xi = small_config(2)
        report = oracle.mc_fim(phi, gamma, xi, 100_000, seed=21, target="gamma")
        mutated = 4.0 * report.closed_form
        assert oracle.frobenius_rel_error(report.estimate, mutated) > 0.05


class TestQuadratureIg:
    def test_reciprocal_recovers_lam(self):
        # IG(nu/2, nu/(2 lam)) has E[1/gamma] = lam.
        for nu, lam in ((2.0, 1.0), (2.01, 3.0), (5.0, 0.25)):
            r = oracle.quad_expectation_ig(nu / 2.0, nu / (2.0 * lam), "reciprocal")
            assert r.passed
            assert r.estimate == pytest.approx(lam, rel=1e-8)

    def test_gamma_kernel_reference(self):
        r = oracle.quad_expectation_ig(1.0, 1.0, "bcrb_gamma_kernel")
        assert r.closed_form == pytest.approx(9.0)
        assert r.passed

    def test_gamma_kernel_mmv(self):
        # nu=2, lam=1, m=50: lam^2 (nu+2)(m+nu+6)/(2 nu) = 58.
        r = oracle.quad_expectation_ig(1.0, 1.0, "bcrb_gamma_kernel", m_vectors=50)
        assert r.closed_form == pytest.approx(58.0)
        assert r.passed

    def test_xi_kernel_reference(self):
        r = oracle.quad_expectation_ig(3.0, 0.2, "bcrb_xi_kernel", n_obs=100)
        assert r.closed_form == pytest.approx(16800.0)
        assert r.passed

    def test_unknown_integrand_rejected(self):
        with pytest.raises(ValueError):
            oracle.quad_expectation_ig(1.0, 1.0, "nope")


class TestQuadratureGcp:
    @pytest.mark.parametrize(
        "tau,nu,lam,expected",
        [
            (2.0, 3.0, 1.0, 2.0 / 3.0),
            (1.0, 2.0, 1.0, 1.125),
            (1.5, 2.5, 2.0, None),
            (0.8, 2.5, 1.3, None),
            (3.0, 4.0, 0.7, None),
        ],
    )
    def test_matches_closed_form(self, tau, nu, lam, expected):
        r = oracle.quad_gcp_fisher_term(model.GcpPrior(tau=tau, nu=nu, lam=lam))
        assert r.passed and r.rel_error <= 1e-6
        if expected is not None:
            assert r.estimate == pytest.approx(expected, rel=1e-8)

    def test_lam_scaling_at_tau_two(self):
        r1 = oracle.quad_gcp_fisher_term(model.GcpPrior(tau=2.0, nu=3.0, lam=1.0))
        r4 = oracle.quad_gcp_fisher_term(model.GcpPrior(tau=2.0, nu=3.0, lam=4.0))
        assert r4.estimate == pytest.approx(4.0 * r1.estimate, rel=1e-8)


class TestFiniteDifferenceHessian:
    def test_gaussian_any_point(self):
        var = 2.0
        logpdf = lambda x: -0.5 * np.log(2 * np.pi * var) - x**2 / (2 * var)
        for point in (-3.0, 0.0, 0.7, 10.0):
            got = oracle.fd_hessian_logprior(logpdf, point)
            assert got == pytest.approx(-1.0 / var, abs=1e-6)

    def test_student_t_matches_analytic(self):
        nu, lam = 3.0, 1.0
        logpdf = lambda x: model.student_t_log_density(nu, lam, np.array([x]))
        got = oracle.fd_hessian_logprior(logpdf, 1.0)
        expected = -(nu + 1) * lam * (nu - lam * 1.0**2) / (nu + lam * 1.0**2) ** 2
        assert got == pytest.approx(expected, abs=1e-6)

    def test_averaged_variance_kernel_value(self):
        # Second derivative in g of E_{x~N(0,1)}[log N(x; 0, g)] + log IG(g)
        # at g = 1 with nu = 2, lam = 1; its negation is the per-component
        # information kernel nu/(lam g^3) - (nu+1)/(2 g^2) = 0.5.
        nu, lam, g_true = 2.0, 1.0, 1.0
        ig = model.IgDistribution(shape=nu / 2.0, rate=nu / (2.0 * lam))

        def averaged(g):
            return -0.5 * np.log(g) - g_true / (2.0 * g) + float(ig.log_density(np.array([g]))[0])

        got = -oracle.fd_hessian_logprior(averaged, 1.0)
        assert got == pytest.approx(0.5, abs=1e-6)

    def test_kink_window_rejected(self):
        logpdf = lambda x: -abs(x)
        with pytest.raises(ValueError):
            oracle.fd_hessian_logprior(logpdf, 1e-5, kink_at=0.0)


class TestSuite:
    def test_quick_suite_passes_and_covers_bounds(self):
        reports = oracle.oracle_suite(level="quick")
        assert all(r.passed for r in reports)
        targets = {r.target for r in reports}
        # One entry per closed-form information term.
        assert {
            "mc-fim-gamma",          # marginalized gamma block
            "mc-fim-gamma-xi",       # marginalized joint block
            "zero-mean-score",       # regularity
            "hcrb-x-information",    # hybrid x block
            "hcrb-gamma-information",
            "hcrb-xi-information",
            "ig-reciprocal",         # Bayesian x block
            "ig-bcrb_gamma_kernel",  # Bayesian gamma block
            "ig-bcrb_xi_kernel",     # Bayesian noise block
            "gcp-fisher-term",       # marginal-prior information
            "mmv-mcrb-gamma-m3",     # MMV scaling
        } <= targets
