"""Closed-form Fisher information matrices and Cramer-Rao type lower bounds.

Three bound families are provided for the linear model y = Phi x + n with
the hierarchical compressible prior of :mod:`crb_sbl.model`:

* hybrid bounds (``HCRB``): x random given a deterministic gamma realization;
* Bayesian bounds (``BCRB``): gamma random under its inverse-gamma hyperprior
  (and optionally a random noise variance);
* marginalized bounds (``MCRB``): nuisance variables (x, or gamma, or both)
  integrated out of the joint density before differentiating.

Every operation returns a :class:`BoundReport` holding the labeled
information-matrix blocks, the assembled matrix, and its inverse (the bound
on the MSE matrix).  Cross-blocks between parameter groups are exactly zero
except for the marginalized (gamma, xi) bound, where integrating x out
couples the noise variance to the per-component variances.

Multiple-measurement-vector (MMV) variants share a common variance profile
across ``m`` columns; their coefficient bounds are Kronecker products with
an identity factor and are returned in factored form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.linalg import cho_solve
from scipy.special import gammaln

from ._linalg import NumericalFailure, chol_inverse, chol_lower, invert_with_conditioning, symmetrize
from .model import GcpPrior, MeasurementEnsemble

__all__ = [
    "BoundReport",
    "MarginalCovariance",
    "UnsupportedBoundError",
    "marginal_covariance",
    "linear_model_information",
    "hcrb_smv",
    "bcrb_smv",
    "mcrb_gamma",
    "mcrb_gamma_orthogonal_bound_diag",
    "mcrb_x_student_t",
    "gcp_fisher_term",
    "mcrb_x_gcp",
    "hcrb_unknown_noise",
    "bcrb_unknown_noise",
    "mcrb_gamma_xi",
    "mmv_bounds",
    "materialize_kronecker",
    "MMV_KINDS",
]

DETERMINISTIC = "deterministic"
RANDOM = "random"

MMV_KINDS = (
    "hcrb-gamma",
    "bcrb-gamma",
    "mcrb-gamma",
    "hcrb-w",
    "bcrb-w",
    "hcrb-xi",
    "bcrb-xi",
    "mcrb-gamma-xi",
)


class UnsupportedBoundError(ValueError):
    """Requested a bound for which no closed form exists."""


def _phi_entries(phi: Union[MeasurementEnsemble, np.ndarray]) -> np.ndarray:
    if isinstance(phi, MeasurementEnsemble):
        return phi.entries
    return np.atleast_2d(np.asarray(phi, dtype=float))


def _check_positive(name: str, value: float) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be positive and finite")
    return value


# ---------------------------------------------------------------------------
# Report container
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundReport:
    """A labeled Fisher information matrix and the lower bound it induces.

    Attributes
    ----------
    kind : str
        One of ``"HCRB"``, ``"BCRB"``, ``"MCRB"``.
    blocks : tuple of (label, ndarray)
        Diagonal blocks of the information matrix in order; labels are drawn
        from ``{"x", "gamma", "xi"}``.
    fim : ndarray
        Full symmetric information matrix (base factor for Kronecker-shaped
        MMV coefficient bounds; see ``kron_factor``).
    bound : ndarray
        Inverse of ``fim``: the lower bound on the MSE matrix.
    params : dict
        Echo of the scalar inputs that produced the report.
    kron_factor : int
        If greater than one, the logical matrices are ``fim (x) I_m`` and
        ``bound (x) I_m``; use :func:`materialize_kronecker` to expand.
    flagged : bool
        Condition number of ``fim`` exceeded 1e12.
    pseudo_inverse : bool
        ``bound`` was computed from a thresholded eigendecomposition.
    """

    kind: str
    blocks: tuple
    fim: np.ndarray
    bound: np.ndarray
    params: dict
    kron_factor: int = 1
    flagged: bool = False
    pseudo_inverse: bool = False
    _slices: dict = field(default_factory=dict, repr=False)

    def labels(self) -> tuple:
        return tuple(label for label, _ in self.blocks)

    def block_fim(self, label: str) -> np.ndarray:
        sl = self._slices[label]
        return self.fim[sl, sl]

    def block_bound(self, label: str) -> np.ndarray:
        sl = self._slices[label]
        return self.bound[sl, sl]

    def bound_trace(self, label: Optional[str] = None) -> float:
        """Trace of the bound, or of one labeled sub-block, including any Kronecker factor."""
        m = self.block_bound(label) if label is not None else self.bound
        return float(np.trace(m)) * self.kron_factor

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "labels": list(self.labels()),
            "block_bound_diagonals": {
                label: np.diag(self.block_bound(label)).tolist() for label in self.labels()
            },
            "bound_trace": self.bound_trace(),
            "kron_factor": self.kron_factor,
            "flagged": self.flagged,
            "pseudo_inverse": self.pseudo_inverse,
            "params": {k: v for k, v in self.params.items()},
        }


def _assemble_report(
    kind: str,
    blocks: list,
    params: dict,
    cross: Optional[dict] = None,
    kron_factor: int = 1,
) -> BoundReport:
    """Build a report from diagonal blocks plus optional labeled cross blocks."""
    sizes = [(label, np.atleast_2d(np.asarray(b, dtype=float))) for label, b in blocks]
    total = sum(b.shape[0] for _, b in sizes)
    fim = np.zeros((total, total))
    slices = {}
    offset = 0
    for label, b in sizes:
        n = b.shape[0]
        slices[label] = slice(offset, offset + n)
        fim[offset : offset + n, offset : offset + n] = b
        offset += n
    if cross:
        for (la, lb), m in cross.items():
            m = np.atleast_2d(np.asarray(m, dtype=float))
            fim[slices[la], slices[lb]] = m
            fim[slices[lb], slices[la]] = m.T
    fim = symmetrize(fim)
    bound, flagged, pseudo = invert_with_conditioning(fim)
    return BoundReport(
        kind=kind,
        blocks=tuple((label, b) for label, b in sizes),
        fim=fim,
        bound=bound,
        params=params,
        kron_factor=kron_factor,
        flagged=flagged,
        pseudo_inverse=pseudo,
        _slices=slices,
    )


def materialize_kronecker(report: BoundReport) -> tuple[np.ndarray, np.ndarray]:
    """Expand a Kronecker-factored report to its full (fim, bound) matrices."""
    eye = np.eye(report.kron_factor)
    return np.kron(report.fim, eye), np.kron(report.bound, eye)


# ---------------------------------------------------------------------------
# Marginal observation covariance
# ---------------------------------------------------------------------------


class MarginalCovariance:
    """The observation covariance xi*I + Phi diag(gamma) Phi^T with a cached factorization.

    All marginalized bounds reuse one factorization per (phi, gamma, xi).
    """

    def __init__(self, phi: Union[MeasurementEnsemble, np.ndarray], gamma: np.ndarray, xi: float):
        entries = _phi_entries(phi)
        gamma = np.asarray(gamma, dtype=float)
        xi = float(xi)
        if xi <= 0:
            raise ValueError("xi must be positive")
        if gamma.shape != (entries.shape[1],):
            raise ValueError("gamma length must match the number of columns of phi")
        if np.any(gamma < 0):
            raise ValueError("gamma entries must be nonnegative")
        self.phi = entries
        self.gamma = gamma
        self.xi = xi
        n = entries.shape[0]
        self.matrix = symmetrize(xi * np.eye(n) + (entries * gamma) @ entries.T)
        try:
            self.cholesky_factor = chol_lower(self.matrix)
        except NumericalFailure as exc:  # pragma: no cover - xi > 0 keeps this PD
            raise NumericalFailure(f"observation covariance not PD: {exc}") from exc
        self._inverse: Optional[np.ndarray] = None

    @property
    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.cholesky_factor))))

    def solve(self, b: np.ndarray) -> np.ndarray:
        return cho_solve((self.cholesky_factor, True), b)

    def inverse(self) -> np.ndarray:
        if self._inverse is None:
            inv, _ = chol_inverse(self.matrix)
            self._inverse = inv
        return self._inverse


def marginal_covariance(
    phi: Union[MeasurementEnsemble, np.ndarray], gamma: np.ndarray, xi: float
) -> MarginalCovariance:
    """Assemble and factor the observation covariance xi*I + Phi diag(gamma) Phi^T."""
    return MarginalCovariance(phi, gamma, xi)


def linear_model_information(
    phi: Union[MeasurementEnsemble, np.ndarray], xi: float, prior_precision_diag: np.ndarray
) -> np.ndarray:
    """Coefficient information Phi^T Phi / xi + diag(prior_precision_diag).

    This shape recurs in every coefficient-block bound; only the diagonal
    prior precision changes between the hybrid, Bayesian, and marginalized
    variants.
    """
    entries = _phi_entries(phi)
    xi = _check_positive("xi", xi)
    d = np.broadcast_to(np.asarray(prior_precision_diag, dtype=float), (entries.shape[1],))
    return symmetrize(entries.T @ entries / xi) + np.diag(d)


# ---------------------------------------------------------------------------
# Known-noise bounds
# ---------------------------------------------------------------------------


def hcrb_smv(
    phi: Union[MeasurementEnsemble, np.ndarray], xi: float, gamma: np.ndarray
) -> BoundReport:
    """Hybrid bound for (x, gamma) with a known gamma realization.

    The x block is Phi^T Phi / xi + diag(gamma)^-1 (achieved by the genie
    MMSE estimator) and the gamma block is diag(1 / (2 gamma_i^2)); the
    cross block vanishes because x has zero conditional mean.
    """
    entries = _phi_entries(phi)
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma <= 0):
        raise ValueError("hybrid bound requires strictly positive gamma")
    x_block = linear_model_information(entries, xi, 1.0 / gamma)
    gamma_block = np.diag(1.0 / (2.0 * gamma**2))
    return _assemble_report(
        "HCRB",
        [("x", x_block), ("gamma", gamma_block)],
        params={"xi": float(xi)},
    )


def bcrb_smv(
    phi: Union[MeasurementEnsemble, np.ndarray],
    xi: float,
    nu: float,
    lam: float,
    dim: Optional[int] = None,
) -> BoundReport:
    """Bayesian bound for (x, gamma) under the inverse-gamma hyperprior.

    Averaging the hybrid x block over gamma replaces diag(gamma)^-1 by
    E[1/gamma_i] = lam, and the gamma block becomes the constant
    lam^2 (nu+2)(nu+7) / (2 nu) per component.  Both blocks depend only on
    (nu, lam), so the bound can be evaluated offline.
    """
    entries = _phi_entries(phi)
    nu = _check_positive("nu", nu)
    lam = _check_positive("lam", lam)
    if dim is not None and dim != entries.shape[1]:
        raise ValueError("dim disagrees with the number of columns of phi")
    dim = entries.shape[1]
    x_block = linear_model_information(entries, xi, np.full(dim, lam))
    gamma_fisher = lam**2 * (nu + 2.0) * (nu + 7.0) / (2.0 * nu)
    gamma_block = gamma_fisher * np.eye(dim)
    return _assemble_report(
        "BCRB",
        [("x", x_block), ("gamma", gamma_block)],
        params={"xi": float(xi), "nu": nu, "lam": lam},
    )


def mcrb_gamma(
    phi: Union[MeasurementEnsemble, np.ndarray], xi: float, gamma: np.ndarray
) -> BoundReport:
    """Marginalized bound on gamma with x integrated out.

    Entry (i, j) of the information matrix is
    (Phi_j^T Sigma_y^-1 Phi_i)^2 / 2 with Sigma_y the marginal observation
    covariance.  Duplicated columns make this singular; the report is then
    flagged and carries a thresholded pseudo-inverse.
    """
    cov = marginal_covariance(phi, gamma, xi)
    a = cov.phi.T @ cov.solve(cov.phi)
    fim = 0.5 * symmetrize(a) ** 2
    return _assemble_report("MCRB", [("gamma", fim)], params={"xi": float(xi)})


def mcrb_gamma_orthogonal_bound_diag(n_obs: int, xi: float, gamma: np.ndarray) -> np.ndarray:
    """Per-component marginalized gamma bound when Phi^T Phi = n_obs * I.

    The Woodbury identity collapses the information entries to
    0.5 * (n_obs / (xi + n_obs * gamma_i))^2, so the bound is
    2 * (xi / n_obs + gamma_i)^2, approaching the hybrid value 2 gamma_i^2
    as n_obs grows.
    """
    gamma = np.asarray(gamma, dtype=float)
    xi = _check_positive("xi", xi)
    if n_obs < 1:
        raise ValueError("n_obs must be positive")
    return 2.0 * (xi / n_obs + gamma) ** 2


def mcrb_x_student_t(
    phi: Union[MeasurementEnsemble, np.ndarray], xi: float, nu: float, lam: float
) -> BoundReport:
    """Marginalized bound on x under the Student-t marginal prior.

    The prior contributes lam (nu+1) / (nu+3) per component, which never
    exceeds the Bayesian value lam, so this bound is always at least as
    tight as the Bayesian one.
    """
    entries = _phi_entries(phi)
    nu = _check_positive("nu", nu)
    lam = _check_positive("lam", lam)
    t2 = lam * (nu + 1.0) / (nu + 3.0)
    fim = linear_model_information(entries, xi, np.full(entries.shape[1], t2))
    return _assemble_report(
        "MCRB", [("x", fim)], params={"xi": float(xi), "nu": nu, "lam": lam}
    )


def gcp_fisher_term(prior: GcpPrior) -> float:
    """Per-component Fisher information of the GCP marginal prior.

        T = tau^2 (nu+1) / (nu+tau+1) * (lam/nu)^(2/tau)
            * Gamma((nu+2)/tau) Gamma(2 - 1/tau) / (Gamma(1/tau) Gamma(nu/tau))

    Requires tau > 1/2 (the Gamma(2 - 1/tau) argument must stay positive).
    At tau = 2 this reduces to lam (nu+1)/(nu+3); at tau = 1 to
    lam^2 (nu+1)^2 / (nu (nu+2)).
    """
    tau, nu, lam = prior.tau, prior.nu, prior.lam
    if tau <= 0.5:
        raise ValueError("the GCP information term requires tau > 1/2")
    log_t = (
        2.0 * np.log(tau)
        + np.log(nu + 1.0)
        - np.log(nu + tau + 1.0)
        + (2.0 / tau) * np.log(lam / nu)
        + gammaln((nu + 2.0) / tau)
        + gammaln(2.0 - 1.0 / tau)
        - gammaln(1.0 / tau)
        - gammaln(nu / tau)
    )
    return float(np.exp(log_t))


def mcrb_x_gcp(
    phi: Union[MeasurementEnsemble, np.ndarray], xi: float, prior: GcpPrior
) -> BoundReport:
    """Marginalized bound on x for a general compressible prior."""
    entries = _phi_entries(phi)
    t_tau = gcp_fisher_term(prior)
    fim = linear_model_information(entries, xi, np.full(entries.shape[1], t_tau))
    return _assemble_report(
        "MCRB",
        [("x", fim)],
        params={"xi": float(xi), "tau": prior.tau, "nu": prior.nu, "lam": prior.lam},
    )


# ---------------------------------------------------------------------------
# Unknown-noise bounds
# ---------------------------------------------------------------------------


def _theta_prime_blocks(
    phi: np.ndarray,
    gamma_mode: str,
    inv_noise: float,
    nu: Optional[float],
    lam: Optional[float],
    gamma: Optional[np.ndarray],
) -> list:
    """(x, gamma) blocks shared by the unknown-noise bounds.

    ``inv_noise`` is the (expected) noise precision entering the x block.
    """
    dim = phi.shape[1]
    if gamma_mode == DETERMINISTIC:
        if gamma is None:
            raise ValueError("deterministic gamma mode requires the gamma realization")
        gamma = np.asarray(gamma, dtype=float)
        if np.any(gamma <= 0):
            raise ValueError("gamma must be strictly positive")
        x_block = symmetrize(phi.T @ phi) * inv_noise + np.diag(1.0 / gamma)
        gamma_block = np.diag(1.0 / (2.0 * gamma**2))
    elif gamma_mode == RANDOM:
        nu = _check_positive("nu", nu)
        lam = _check_positive("lam", lam)
        x_block = symmetrize(phi.T @ phi) * inv_noise + lam * np.eye(dim)
        gamma_block = lam**2 * (nu + 2.0) * (nu + 7.0) / (2.0 * nu) * np.eye(dim)
    else:
        raise ValueError(f"gamma_mode must be '{DETERMINISTIC}' or '{RANDOM}'")
    return [("x", x_block), ("gamma", gamma_block)]


def hcrb_unknown_noise(
    phi: Union[MeasurementEnsemble, np.ndarray],
    xi: float,
    gamma_mode: str,
    nu: Optional[float] = None,
    lam: Optional[float] = None,
    gamma: Optional[np.ndarray] = None,
) -> BoundReport:
    """Hybrid bound for (x, gamma, xi) with a deterministic unknown noise variance.

    The noise block is n_obs / (2 xi^2), independent of phi and gamma, and
    every cross block with xi vanishes.
    """
    entries = _phi_entries(phi)
    xi = _check_positive("xi", xi)
    blocks = _theta_prime_blocks(entries, gamma_mode, 1.0 / xi, nu, lam, gamma)
    xi_block = np.array([[entries.shape[0] / (2.0 * xi**2)]])
    blocks.append(("xi", xi_block))
    return _assemble_report(
        "HCRB",
        blocks,
        params={"xi": xi, "gamma_mode": gamma_mode, "nu": nu, "lam": lam},
    )


def bcrb_unknown_noise(
    phi: Union[MeasurementEnsemble, np.ndarray],
    gamma_mode: str,
    nu: Optional[float] = None,
    lam: Optional[float] = None,
    c: float = None,
    d: float = None,
    n_obs: Optional[int] = None,
    gamma: Optional[np.ndarray] = None,
) -> BoundReport:
    """Bayesian bound for (x, gamma, xi) with xi ~ InvGamma(c, d).

    The noise block is c (c+1) (n_obs/2 + c + 3) / d^2, computable offline
    from the hyperprior alone.  The x block uses the prior mean noise
    precision E[1/xi] = c/d.  The non-informative limit c, d -> 0 leaves the
    bound indeterminate, so nonpositive parameters are rejected.
    """
    entries = _phi_entries(phi)
    c = _check_positive("c", c)
    d = _check_positive("d", d)
    if n_obs is not None and n_obs != entries.shape[0]:
        raise ValueError("n_obs disagrees with the number of rows of phi")
    n = entries.shape[0]
    blocks = _theta_prime_blocks(entries, gamma_mode, c / d, nu, lam, gamma)
    xi_fisher = c * (c + 1.0) * (n / 2.0 + c + 3.0) / d**2
    blocks.append(("xi", np.array([[xi_fisher]])))
    return _assemble_report(
        "BCRB",
        blocks,
        params={"c": c, "d": d, "gamma_mode": gamma_mode, "nu": nu, "lam": lam},
    )


def mcrb_gamma_xi(
    phi: Union[MeasurementEnsemble, np.ndarray], xi: float, gamma: np.ndarray
) -> BoundReport:
    """Marginalized joint bound on (gamma, xi) with x integrated out.

    Unlike the hybrid and Bayesian cases, the cross block is nonzero:
    marginalizing x couples gamma and xi through Sigma_y, giving
    cross entries Phi_i^T Sigma_y^-2 Phi_i / 2 and noise entry
    Tr(Sigma_y^-2) / 2.
    """
    cov = marginal_covariance(phi, gamma, xi)
    b = cov.solve(cov.phi)  # Sigma_y^-1 Phi
    a = cov.phi.T @ b
    gamma_block = 0.5 * symmetrize(a) ** 2
    cross = 0.5 * np.sum(b * b, axis=0)[:, None]  # Phi_i^T Sigma_y^-2 Phi_i / 2
    sigma_inv = cov.inverse()
    xi_entry = 0.5 * float(np.sum(sigma_inv**2))  # Tr(Sigma_y^-2) / 2
    return _assemble_report(
        "MCRB",
        [("gamma", gamma_block), ("xi", np.array([[xi_entry]]))],
        params={"xi": float(xi)},
        cross={("gamma", "xi"): cross},
    )


# ---------------------------------------------------------------------------
# MMV bounds
# ---------------------------------------------------------------------------


def mmv_bounds(
    kind: str,
    n_vectors: int,
    phi: Union[MeasurementEnsemble, np.ndarray, None] = None,
    xi: Optional[float] = None,
    gamma: Optional[np.ndarray] = None,
    nu: Optional[float] = None,
    lam: Optional[float] = None,
    c: Optional[float] = None,
    d: Optional[float] = None,
    n_obs: Optional[int] = None,
) -> BoundReport:
    """Bounds for the multiple-measurement-vector model with m shared-profile columns.

    ``kind`` selects among ``hcrb-gamma``, ``bcrb-gamma``, ``mcrb-gamma``,
    ``hcrb-w``, ``bcrb-w``, ``hcrb-xi``, ``bcrb-xi``, ``mcrb-gamma-xi``.
    Every kind reduces to its single-vector counterpart at m = 1.  The
    gamma and noise information grow linearly in m (their bounds shrink by
    1/m); the coefficient bounds are the single-vector matrices Kronecker
    an m-dimensional identity and come back in factored form.

    ``mcrb-w`` has no closed form and raises :class:`UnsupportedBoundError`.
    """
    m = int(n_vectors)
    if m < 1:
        raise ValueError("n_vectors must be at least 1")
    kind = kind.lower()
    if kind == "mcrb-w":
        raise UnsupportedBoundError(
            "no closed-form information matrix exists for the MMV coefficient MCRB"
        )
    if kind not in MMV_KINDS:
        raise ValueError(f"kind must be one of {MMV_KINDS}")

    if kind == "hcrb-gamma":
        gamma = np.asarray(gamma, dtype=float)
        if np.any(gamma <= 0):
            raise ValueError("gamma must be strictly positive")
        fim = np.diag(m / (2.0 * gamma**2))
        return _assemble_report("HCRB", [("gamma", fim)], params={"m": m})

    if kind == "bcrb-gamma":
        nu = _check_positive("nu", nu)
        lam = _check_positive("lam", lam)
        if phi is not None:
            dim = _phi_entries(phi).shape[1]
        else:
            dim = np.asarray(gamma).size if gamma is not None else 1
        fisher = lam**2 * (nu + 2.0) * (m + nu + 6.0) / (2.0 * nu)
        return _assemble_report(
            "BCRB", [("gamma", fisher * np.eye(dim))], params={"m": m, "nu": nu, "lam": lam}
        )

    if kind == "mcrb-gamma":
        base = mcrb_gamma(phi, xi, gamma)
        return _assemble_report(
            "MCRB", [("gamma", m * base.fim)], params={"m": m, "xi": float(xi)}
        )

    if kind == "hcrb-w":
        base = hcrb_smv(phi, xi, gamma)
        return _assemble_report(
            "HCRB", [("x", base.block_fim("x"))], params={"m": m, "xi": float(xi)}, kron_factor=m
        )

    if kind == "bcrb-w":
        base = bcrb_smv(phi, xi, nu, lam)
        return _assemble_report(
            "BCRB",
            [("x", base.block_fim("x"))],
            params={"m": m, "xi": float(xi), "nu": nu, "lam": lam},
            kron_factor=m,
        )

    if kind == "hcrb-xi":
        xi = _check_positive("xi", xi)
        if n_obs is None:
            n_obs = _phi_entries(phi).shape[0]
        fim = np.array([[m * n_obs / (2.0 * xi**2)]])
        return _assemble_report("HCRB", [("xi", fim)], params={"m": m, "xi": xi})

    if kind == "bcrb-xi":
        c = _check_positive("c", c)
        d = _check_positive("d", d)
        if n_obs is None:
            n_obs = _phi_entries(phi).shape[0]
        fim = np.array([[c * (c + 1.0) * (m * n_obs / 2.0 + c + 3.0) / d**2]])
        return _assemble_report("BCRB", [("xi", fim)], params={"m": m, "c": c, "d": d})

    # mcrb-gamma-xi: m times the single-vector joint information matrix.
    base = mcrb_gamma_xi(phi, xi, gamma)
    dim = base.block_fim("gamma").shape[0]
    cross = m * base.fim[: dim, dim:]
    return _assemble_report(
        "MCRB",
        [("gamma", m * base.block_fim("gamma")), ("xi", m * base.block_fim("xi"))],
        params={"m": m, "xi": float(xi)},
        cross={("gamma", "xi"): cross},
    )
