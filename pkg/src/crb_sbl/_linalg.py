"""Dense symmetric linear algebra helpers shared across the package."""

from __future__ import annotations

import numpy as np
from scipy.linalg.lapack import dpotrf, dpotri


class NumericalFailure(RuntimeError):
    """A dense factorization or iterative solve failed to produce a usable result."""


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Return the symmetric part (a + a.T) / 2."""
    return 0.5 * (a + a.T)


def chol_lower(a: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Raises
    ------
    NumericalFailure
        If the matrix is not numerically positive definite.
    """
    c, info = dpotrf(a, lower=1, clean=1, overwrite_a=0)
    if info != 0:
        raise NumericalFailure(
            f"Cholesky factorization failed (leading minor {info} not positive definite)"
        )
    return c


def chol_inverse(a: np.ndarray) -> tuple[np.ndarray, float]:
    """Invert a symmetric positive definite matrix via Cholesky.

    Returns
    -------
    inv : ndarray
        Symmetric inverse of ``a``.
    logdet : float
        log-determinant of ``a``.
    """
    c = chol_lower(a)
    logdet = 2.0 * float(np.sum(np.log(np.diag(c))))
    inv, info = dpotri(c, lower=1, overwrite_c=0)
    if info != 0:
        raise NumericalFailure("dpotri failed on a Cholesky factor")
    inv = np.tril(inv) + np.tril(inv, -1).T
    return inv, logdet


def invert_with_conditioning(
    fim: np.ndarray, cond_limit: float = 1e12
) -> tuple[np.ndarray, bool, bool]:
    """Invert a symmetric information matrix with a conditioning guard.

    Well-conditioned matrices go through Cholesky.  If the condition number
    exceeds ``cond_limit`` (or the factorization fails), the inverse is
    computed from an eigendecomposition with thresholded reciprocal
    eigenvalues and the result is flagged as a pseudo-inverse.

    Returns
    -------
    inverse : ndarray
    flagged : bool
        True when the condition number exceeded ``cond_limit``.
    pseudo : bool
        True when a thresholded eigen-inverse was used instead of Cholesky.
    """
    fim = symmetrize(np.asarray(fim, dtype=float))
    eigvals = np.linalg.eigvalsh(fim)
    lo, hi = eigvals[0], eigvals[-1]
    ill = hi <= 0 or lo <= 0 or (hi / max(lo, np.finfo(float).tiny)) > cond_limit
    if not ill:
        try:
            inv, _ = chol_inverse(fim)
            return inv, False, False
        except NumericalFailure:
            ill = True
    w, v = np.linalg.eigh(fim)
    cut = np.max(np.abs(w)) / cond_limit
    w_inv = np.where(np.abs(w) > cut, 1.0 / np.where(np.abs(w) > cut, w, 1.0), 0.0)
    inv = symmetrize((v * w_inv) @ v.T)
    return inv, True, True
