"""Dense symmetric linear algebra used by every bound.

Matrices are plain ``numpy`` arrays; :func:`sym` validates and symmetrizes.
:func:`eig_sym` is backed by LAPACK (``numpy.linalg.eigh``); a cyclic Jacobi
solver (:func:`jacobi_eigh`) is kept as an independent reference.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .constants import JACOBI_OFFDIAG_RTOL, PD_RTOL
from .errors import DomainError, InputError


def sym(M) -> np.ndarray:
    """Return ``(M + M.T) / 2`` as a float array, rejecting bad input."""
    M = np.array(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise InputError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InputError("matrix has non-finite entries")
    return 0.5 * (M + M.T)


@dataclass(frozen=True)
class EigDecomp:
    """Eigenvalues in descending order and matching orthonormal eigenvectors (columns)."""

    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.T


def eig_sym(M) -> EigDecomp:
    M = sym(M)
    w, V = np.linalg.eigh(M)
    return EigDecomp(w[::-1].copy(), V[:, ::-1].copy())


def jacobi_eigh(M, max_sweeps: int = 100) -> EigDecomp:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Sweeps over all (p, q) pairs applying the rotation that annihilates
    ``A[p, q]`` until the off-diagonal Frobenius norm drops below
    ``JACOBI_OFFDIAG_RTOL * ||M||_F``.
    """
    A = sym(M)
    n = A.shape[0]
    V = np.eye(n)
    target = JACOBI_OFFDIAG_RTOL * np.linalg.norm(A)
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                elif abs(theta) > 1e150:
                    t = 0.5 / theta  # theta^2 would overflow
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                rp = A[p, :].copy()
                rq = A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                V[:, p] = c * vp - s * V[:, q]
                V[:, q] = s * vp + c * V[:, q]
    else:
        raise DomainError("Jacobi iteration did not converge")
    w = np.diag(A).copy()
    order = np.argsort(-w, kind="stable")
    return EigDecomp(w[order], V[:, order])


def ldet_pd(M) -> float:
    """Natural log of the determinant of a positive definite matrix."""
    lam = eig_sym(M).values
    _require_pd(lam)
    return float(np.sum(np.log(lam)))


def solve_pd(M, B) -> np.ndarray:
    """Solve ``M X = B`` for positive definite ``M``."""
    M = sym(M)
    lam = np.linalg.eigvalsh(M)[::-1]
    _require_pd(lam)
    B = np.asarray(B, dtype=float)
    return scipy.linalg.cho_solve(scipy.linalg.cho_factor(M, lower=True), B)


def _require_pd(lam):
    lmax, lmin = lam[0], lam[-1]
    if not (lmax > 0.0 and lmin > PD_RTOL * lmax):
        raise DomainError(f"matrix is not positive definite (lambda_min={lmin:.3e})", lambda_min=float(lmin))


def chol_or_none(M):
    """Cholesky factor for hot loops; ``None`` signals 'not PD' instead of raising."""
    try:
        return scipy.linalg.cho_factor(M, lower=True, check_finite=False)
    except (np.linalg.LinAlgError, ValueError):
        return None


def chol_logdet(cf) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(cf[0]))))
