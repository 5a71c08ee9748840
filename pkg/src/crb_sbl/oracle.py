"""Independent numerical verification of the closed-form information matrices.

Every closed form shipped by :mod:`crb_sbl.bounds` is re-derived here by a
route that shares no code with it:

* Monte-Carlo information matrices from score outer products;
* adaptive quadrature of inverse-gamma and compressible-prior expectations;
* Richardson-extrapolated finite-difference Hessians of log densities;
* zero-mean score (regularity) checks.

Each check returns an :class:`OracleReport` comparing the independent
estimate against the closed form at a stated tolerance (5e-2 for
Monte-Carlo targets, 1e-6 for quadrature).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.integrate import quad

from . import bounds as bnd
from ._linalg import NumericalFailure
from .model import GcpPrior, IgDistribution, MeasurementEnsemble

__all__ = [
    "OracleReport",
    "MC_TOLERANCE",
    "QUAD_TOLERANCE",
    "score_gamma_xi",
    "regularity_check",
    "mc_fim",
    "quad_expectation_ig",
    "quad_gcp_fisher_term",
    "fd_hessian_logprior",
    "frobenius_rel_error",
    "oracle_suite",
]

MC_TOLERANCE = 5e-2
QUAD_TOLERANCE = 1e-6

IG_INTEGRANDS = ("reciprocal", "bcrb_gamma_kernel", "bcrb_xi_kernel")


@dataclass(frozen=True)
class OracleReport:
    """Closed form vs independent estimate for one target quantity."""

    target: str
    closed_form: Union[float, np.ndarray]
    estimate: Union[float, np.ndarray]
    rel_error: float
    std_error: Optional[float]
    samples_or_nodes: int
    tolerance: float
    passed: bool

    def to_json_dict(self) -> dict:
        def _plain(v):
            return v.tolist() if isinstance(v, np.ndarray) else v

        return {
            "target": self.target,
            "closed_form": _plain(self.closed_form),
            "estimate": _plain(self.estimate),
            "rel_error": self.rel_error,
            "std_error": self.std_error,
            "samples_or_nodes": self.samples_or_nodes,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def frobenius_rel_error(estimate: np.ndarray, reference: np.ndarray) -> float:
    """||estimate - reference||_F / ||reference||_F."""
    ref = np.linalg.norm(np.asarray(reference, dtype=float))
    return float(np.linalg.norm(np.asarray(estimate) - np.asarray(reference)) / ref)


def _entries(phi):
    if isinstance(phi, MeasurementEnsemble):
        return phi.entries
    return np.atleast_2d(np.asarray(phi, dtype=float))


# ---------------------------------------------------------------------------
# Scores of the marginalized log likelihood
# ---------------------------------------------------------------------------


def score_gamma_xi(
    y: np.ndarray,
    phi: Union[MeasurementEnsemble, np.ndarray],
    gamma: np.ndarray,
    xi: float,
) -> np.ndarray:
    """Analytic gradient of the marginal log likelihood in (gamma_1..L, xi).

    With u = Sigma_y^-1 y, the gamma_j component is
    ((Phi_j^T u)^2 - Phi_j^T Sigma_y^-1 Phi_j) / 2 and the xi component is
    -(Tr(Sigma_y^-1) - u^T u) / 2.
    """
    scores = _score_batch(np.atleast_2d(np.asarray(y, dtype=float)), phi, gamma, xi)
    return scores[0]


def _score_batch(ys, phi, gamma, xi):
    """Scores for each row of ``ys``; returns (n, L + 1)."""
    entries = _entries(phi)
    cov = bnd.marginal_covariance(entries, gamma, xi)
    b = cov.solve(entries)  # Sigma^-1 Phi
    col_info = np.sum(entries * b, axis=0)  # Phi_j^T Sigma^-1 Phi_j
    u = cov.solve(ys.T).T  # rows = Sigma^-1 y
    proj = ys @ b  # rows of Phi_j^T Sigma^-1 y
    gamma_scores = 0.5 * (proj**2 - col_info)
    trace_inv = float(np.trace(cov.inverse()))
    xi_scores = -0.5 * (trace_inv - np.sum(u * u, axis=1))
    return np.concatenate([gamma_scores, xi_scores[:, None]], axis=1)


def _sample_observations(cov: bnd.MarginalCovariance, n_samples: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_samples, cov.matrix.shape[0]))
    return z @ cov.cholesky_factor.T


def regularity_check(
    phi: Union[MeasurementEnsemble, np.ndarray],
    gamma: np.ndarray,
    xi: float,
    n_samples: int,
    seed: int,
) -> OracleReport:
    """Monte-Carlo check that the score has zero mean under the model.

    Draws y ~ N(0, Sigma_y) and passes when every component of the mean
    score lies within three standard errors of zero.  ``rel_error`` is the
    largest |mean| / (3 * stderr) ratio, so passing means rel_error <= 1.
    """
    if n_samples < 1000:
        raise ValueError("regularity check needs at least 1e3 samples")
    cov = bnd.marginal_covariance(phi, gamma, xi)
    ys = _sample_observations(cov, n_samples, seed)
    scores = _score_batch(ys, phi, gamma, xi)
    mean = scores.mean(axis=0)
    se = scores.std(axis=0, ddof=1) / np.sqrt(n_samples)
    se = np.maximum(se, 1e-300)
    ratio = float(np.max(np.abs(mean) / (3.0 * se)))
    return OracleReport(
        target="zero-mean-score",
        closed_form=np.zeros_like(mean),
        estimate=mean,
        rel_error=ratio,
        std_error=float(np.max(se)),
        samples_or_nodes=n_samples,
        tolerance=1.0,
        passed=bool(ratio <= 1.0),
    )


def mc_fim(
    phi: Union[MeasurementEnsemble, np.ndarray],
    gamma: np.ndarray,
    xi: float,
    n_samples: int,
    seed: int,
    target: str = "gamma-xi",
) -> OracleReport:
    """Monte-Carlo information matrix from score outer products.

    Estimates E[s s^T] with s the analytic score in (gamma, xi) and compares
    against the closed-form marginalized information matrix: the gamma block
    alone (``target="gamma"``) or the joint (gamma, xi) matrix
    (``target="gamma-xi"``).  Uses first derivatives only, which has lower
    variance than sampled Hessians.  Intended for small instances.
    """
    if target not in ("gamma", "gamma-xi"):
        raise ValueError("target must be 'gamma' or 'gamma-xi'")
    cov = bnd.marginal_covariance(phi, gamma, xi)
    ys = _sample_observations(cov, n_samples, seed)
    scores = _score_batch(ys, phi, gamma, xi)
    if target == "gamma":
        scores = scores[:, :-1]
        closed = bnd.mcrb_gamma(phi, xi, gamma).fim
    else:
        closed = bnd.mcrb_gamma_xi(phi, xi, gamma).fim
    estimate = scores.T @ scores / n_samples
    second = (scores**2).T @ (scores**2) / n_samples
    entry_se = np.sqrt(np.maximum(second - estimate**2, 0.0) / n_samples)
    rel = frobenius_rel_error(estimate, closed)
    return OracleReport(
        target=f"mc-fim-{target}",
        closed_form=closed,
        estimate=estimate,
        rel_error=rel,
        std_error=float(np.linalg.norm(entry_se)),
        samples_or_nodes=n_samples,
        tolerance=MC_TOLERANCE,
        passed=bool(rel <= MC_TOLERANCE),
    )


# ---------------------------------------------------------------------------
# Quadrature of inverse-gamma expectations
# ---------------------------------------------------------------------------


def _quad_positive_axis(f: Callable[[float], float], scale: float) -> tuple[float, float, int]:
    """Integrate f over (0, inf) through the map x = scale * t / (1 - t)."""

    def transformed(t: float) -> float:
        x = scale * t / (1.0 - t)
        return f(x) * scale / (1.0 - t) ** 2

    value, err, info = quad(transformed, 0.0, 1.0, epsabs=1e-10, epsrel=1e-10,
                            limit=400, full_output=True)[:3]
    return value, err, int(info["neval"])


def quad_expectation_ig(
    shape: float,
    rate: float,
    integrand: str,
    n_obs: Optional[int] = None,
    m_vectors: int = 1,
) -> OracleReport:
    """Adaptive quadrature of an inverse-gamma expectation vs its closed form.

    Integrands (x ~ InvGamma(shape, rate), with (nu, lam) = (2 shape,
    shape/rate) for the variance hyperprior and (c, d) = (shape, rate) for
    the noise prior):

    * ``reciprocal``: E[1/x], closed form shape/rate (equals lam).
    * ``bcrb_gamma_kernel``: E[m/(2x^2) - (nu+2)/(2x^2) + nu/(lam x^3)],
      the gamma-block information; closed form
      lam^2 (nu+2)(m+nu+6) / (2 nu) with m = ``m_vectors``.
    * ``bcrb_xi_kernel``: E[(m*n/2 - c - 1)/x^2 + 2 d/x^3], the noise-block
      information; closed form c (c+1) (m*n/2 + c + 3) / d^2 (needs
      ``n_obs``).
    """
    if integrand not in IG_INTEGRANDS:
        raise ValueError(f"integrand must be one of {IG_INTEGRANDS}")
    dist = IgDistribution(shape=shape, rate=rate)
    m = int(m_vectors)

    if integrand == "reciprocal":
        kernel = lambda x: 1.0 / x
        closed = shape / rate
    elif integrand == "bcrb_gamma_kernel":
        nu, lam = 2.0 * shape, shape / rate
        kernel = lambda x: (m - (nu + 2.0)) / (2.0 * x**2) + nu / (lam * x**3)
        closed = lam**2 * (nu + 2.0) * (m + nu + 6.0) / (2.0 * nu)
    else:
        if n_obs is None:
            raise ValueError("bcrb_xi_kernel requires n_obs")
        c, d = shape, rate
        half_n = m * n_obs / 2.0
        kernel = lambda x: (half_n - c - 1.0) / x**2 + 2.0 * d / x**3
        closed = c * (c + 1.0) * (half_n + c + 3.0) / d**2

    def f(x: float) -> float:
        if x <= 0.0:
            return 0.0
        return kernel(x) * float(np.exp(dist.log_density(x)))

    mode = rate / (shape + 1.0)
    value, err, nodes = _quad_positive_axis(f, mode)
    if not np.isfinite(value) or err > max(1e-8, 1e-8 * abs(value)):
        raise ValueError(
            f"quadrature for {integrand} did not converge (error estimate {err:.2e})"
        )
    rel = abs(value - closed) / abs(closed)
    return OracleReport(
        target=f"ig-{integrand}",
        closed_form=float(closed),
        estimate=float(value),
        rel_error=float(rel),
        std_error=None,
        samples_or_nodes=nodes,
        tolerance=QUAD_TOLERANCE,
        passed=bool(rel <= QUAD_TOLERANCE),
    )


def quad_gcp_fisher_term(prior: GcpPrior) -> OracleReport:
    """Quadrature of the compressible-prior information integral.

    Integrates the squared score (d log p / dx)^2 against the density.  For
    a smooth density (tau > 1) this equals -E[d^2 log p / dx^2]; at tau <= 1
    the pointwise second derivative misses the contribution of the kink at
    the origin, while the squared-score integral stays valid, so the latter
    is used one-sided and doubled by symmetry.
    """
    tau, nu, lam = prior.tau, prior.nu, prior.lam
    if tau <= 0.5:
        raise ValueError("information integral requires tau > 1/2")
    k = prior.norm_const
    closed = bnd.gcp_fisher_term(prior)

    def f(x: float) -> float:
        if x <= 0.0:
            return 0.0
        score = -(nu + 1.0) * lam * x ** (tau - 1.0) / (nu + lam * x**tau)
        dens = k * (1.0 + lam * x**tau / nu) ** (-(nu + 1.0) / tau)
        return score**2 * dens

    scale = (nu / lam) ** (1.0 / tau)
    value, err, nodes = _quad_positive_axis(f, scale)
    value *= 2.0  # symmetric halves
    if not np.isfinite(value) or 2.0 * err > max(1e-8, 1e-7 * abs(value)):
        raise NumericalFailure(
            f"GCP information quadrature did not converge (error estimate {err:.2e})"
        )
    rel = abs(value - closed) / abs(closed)
    return OracleReport(
        target="gcp-fisher-term",
        closed_form=float(closed),
        estimate=float(value),
        rel_error=float(rel),
        std_error=None,
        samples_or_nodes=nodes,
        tolerance=QUAD_TOLERANCE,
        passed=bool(rel <= QUAD_TOLERANCE),
    )


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------


def fd_hessian_logprior(
    logpdf: Callable[[float], float],
    point: float,
    kink_at: Optional[float] = None,
) -> float:
    """Richardson-extrapolated central second difference of a scalar log density.

    Step h = 1e-4 * max(1, |point|).  If the density is known to have a
    non-differentiable kink at ``kink_at``, points within 10 h of it are
    rejected rather than silently differenced across the kink.
    """
    point = float(point)
    h = 1e-4 * max(1.0, abs(point))
    if kink_at is not None and abs(point - kink_at) < 10.0 * h:
        raise ValueError("point is within the kink-exclusion window")

    def second_diff(step: float) -> float:
        return (logpdf(point + step) - 2.0 * logpdf(point) + logpdf(point - step)) / step**2

    d_h = second_diff(h)
    d_half = second_diff(h / 2.0)
    return (4.0 * d_half - d_h) / 3.0


# ---------------------------------------------------------------------------
# Suite
# ---------------------------------------------------------------------------


def _gaussian_score_information(phi, gamma, xi, n_samples, seed) -> OracleReport:
    """MC check of the coefficient information Phi^T Phi / xi + diag(gamma)^-1.

    Samples (x, y) from the joint model and averages the outer product of
    the x-score Phi^T (y - Phi x)/xi - x/gamma.
    """
    entries = _entries(phi)
    gamma = np.asarray(gamma, dtype=float)
    rng = np.random.default_rng(seed)
    n, dim = entries.shape
    x = np.sqrt(gamma) * rng.standard_normal((n_samples, dim))
    noise = np.sqrt(xi) * rng.standard_normal((n_samples, n))
    scores = (noise @ entries) / xi - x / gamma
    estimate = scores.T @ scores / n_samples
    closed = bnd.hcrb_smv(entries, xi, gamma).block_fim("x")
    rel = frobenius_rel_error(estimate, closed)
    return OracleReport(
        target="hcrb-x-information",
        closed_form=closed,
        estimate=estimate,
        rel_error=rel,
        std_error=None,
        samples_or_nodes=n_samples,
        tolerance=MC_TOLERANCE,
        passed=bool(rel <= MC_TOLERANCE),
    )


def _noise_score_information(n_obs, xi, n_samples, seed) -> OracleReport:
    """MC check of the Gaussian noise information n / (2 xi^2)."""
    rng = np.random.default_rng(seed)
    noise = np.sqrt(xi) * rng.standard_normal((n_samples, n_obs))
    scores = -n_obs / (2.0 * xi) + np.sum(noise**2, axis=1) / (2.0 * xi**2)
    estimate = float(np.mean(scores**2))
    closed = n_obs / (2.0 * xi**2)
    rel = abs(estimate - closed) / closed
    return OracleReport(
        target="hcrb-xi-information",
        closed_form=closed,
        estimate=estimate,
        rel_error=rel,
        std_error=float(np.std(scores**2, ddof=1) / np.sqrt(n_samples) / closed),
        samples_or_nodes=n_samples,
        tolerance=MC_TOLERANCE,
        passed=bool(rel <= MC_TOLERANCE),
    )


def _hcrb_gamma_fd(gamma_value: float) -> OracleReport:
    """Finite-difference check of the per-component gamma information 1/(2 gamma^2).

    Differentiates g -> E_x[log N(x; 0, g)] + const at g = gamma, where the
    expectation over x ~ N(0, gamma) has the closed form
    -log(g)/2 - gamma/(2 g).
    """

    def averaged_logpdf(g: float) -> float:
        return -0.5 * np.log(g) - gamma_value / (2.0 * g)

    estimate = -fd_hessian_logprior(averaged_logpdf, gamma_value)
    closed = 1.0 / (2.0 * gamma_value**2)
    rel = abs(estimate - closed) / closed
    return OracleReport(
        target="hcrb-gamma-information",
        closed_form=closed,
        estimate=estimate,
        rel_error=rel,
        std_error=None,
        samples_or_nodes=5,
        tolerance=QUAD_TOLERANCE,
        passed=bool(rel <= QUAD_TOLERANCE),
    )


def _mmv_gamma_mc(phi, gamma, xi, m, n_samples, seed) -> OracleReport:
    """MC check that m shared-profile columns carry m times the gamma information."""
    cov = bnd.marginal_covariance(phi, gamma, xi)
    rng = np.random.default_rng(seed)
    n = cov.matrix.shape[0]
    z = rng.standard_normal((n_samples, m, n))
    ys = z @ cov.cholesky_factor.T
    total = None
    for j in range(m):
        scores = _score_batch(ys[:, j, :], phi, gamma, xi)[:, :-1]
        total = scores if total is None else total + scores
    estimate = total.T @ total / n_samples
    closed = bnd.mmv_bounds("mcrb-gamma", m, phi=phi, xi=xi, gamma=gamma).fim
    rel = frobenius_rel_error(estimate, closed)
    return OracleReport(
        target=f"mmv-mcrb-gamma-m{m}",
        closed_form=closed,
        estimate=estimate,
        rel_error=rel,
        std_error=None,
        samples_or_nodes=n_samples,
        tolerance=MC_TOLERANCE,
        passed=bool(rel <= MC_TOLERANCE),
    )


def oracle_suite(level: str = "quick", seed: int = 20240501) -> list[OracleReport]:
    """Run every oracle check; ``level`` is ``"quick"`` or ``"full"``.

    The full level covers each closed-form information term shipped by
    :mod:`crb_sbl.bounds` with 1e5-sample Monte-Carlo targets; quick shrinks
    the Monte-Carlo budgets to finish in seconds.
    """
    if level not in ("quick", "full"):
        raise ValueError("level must be 'quick' or 'full'")
    full = level == "full"
    n_mc = 100_000 if full else 10_000
    reports: list[OracleReport] = []

    rng = np.random.default_rng(seed)
    phi_small = (2.0 * rng.integers(0, 2, size=(4, 2)) - 1.0).astype(float)
    gamma_small = np.array([0.8, 1.7])
    xi_small = 0.4

    # Marginalized bounds: MC score outer products.
    reports.append(mc_fim(phi_small, gamma_small, xi_small, n_mc, seed + 1, target="gamma"))
    reports.append(mc_fim(phi_small, gamma_small, xi_small, n_mc, seed + 2, target="gamma-xi"))
    if full:
        phi_mid = (2.0 * rng.integers(0, 2, size=(8, 4)) - 1.0).astype(float)
        gamma_mid = rng.gamma(2.0, 0.7, size=4) + 0.2
        reports.append(mc_fim(phi_mid, gamma_mid, 0.25, n_mc, seed + 3, target="gamma"))
        reports.append(mc_fim(phi_mid, gamma_mid, 0.25, n_mc, seed + 4, target="gamma-xi"))

    # Regularity of the marginalized score.
    reports.append(regularity_check(phi_small, gamma_small, xi_small, n_mc, seed + 5))
    if full:
        for i in range(4):
            phi_r = (2.0 * rng.integers(0, 2, size=(6, 3)) - 1.0).astype(float)
            gamma_r = rng.gamma(2.0, 0.5, size=3) + 0.1
            xi_r = float(rng.uniform(0.1, 1.0))
            reports.append(regularity_check(phi_r, gamma_r, xi_r, n_mc, seed + 6 + i))

    # Hybrid blocks.
    reports.append(_gaussian_score_information(phi_small, gamma_small, xi_small, n_mc, seed + 10))
    reports.append(_hcrb_gamma_fd(1.3))
    reports.append(_noise_score_information(12, 0.3, n_mc, seed + 11))

    # Bayesian blocks via quadrature.
    for nu, lam in ((2.0, 1.0), (2.01, 3.0), (3.5, 0.5)):
        reports.append(quad_expectation_ig(nu / 2.0, nu / (2.0 * lam), "reciprocal"))
        reports.append(quad_expectation_ig(nu / 2.0, nu / (2.0 * lam), "bcrb_gamma_kernel"))
    reports.append(quad_expectation_ig(1.0, 0.25, "bcrb_gamma_kernel", m_vectors=50))
    reports.append(quad_expectation_ig(3.0, 0.2, "bcrb_xi_kernel", n_obs=100))
    reports.append(quad_expectation_ig(3.0, 0.2, "bcrb_xi_kernel", n_obs=64, m_vectors=4))

    # Marginal-prior information terms.
    for tau, nu, lam in ((2.0, 3.0, 1.0), (1.0, 2.0, 1.0), (1.5, 2.5, 2.0), (3.0, 4.0, 0.7)):
        reports.append(quad_gcp_fisher_term(GcpPrior(tau=tau, nu=nu, lam=lam)))

    # MMV gamma information scaling.
    reports.append(_mmv_gamma_mc(phi_small, gamma_small, xi_small, 3,
                                 n_mc if full else 5000, seed + 20))
    return reports
