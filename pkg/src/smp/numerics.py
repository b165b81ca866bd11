"""Dense SPD linear algebra and scalar kernels shared by the estimators.

All quadratic forms go through triangular solves against a Cholesky factor;
no explicit inverse is formed anywhere in the package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import linalg
from scipy.special import expit, log_expit, logsumexp

from .errors import DimensionMismatch, NotPositiveDefinite, NotPSD

__all__ = [
    "SpdFactor",
    "spd_factorize",
    "quad_form_inv",
    "sherman_morrison_leverage",
    "degrees_of_freedom",
    "trace_inverse",
    "sigmoid",
    "log_sigmoid",
    "logistic_loss",
    "logsumexp",
]

PIVOT_RTOL = 1e-14
SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class SpdFactor:
    """Lower Cholesky factor ``L`` of an SPD matrix ``A = L @ L.T``.

    Instances are immutable and can be shared between threads.
    """

    dim: int
    factor: NDArray[np.float64]

    def matrix(self) -> NDArray[np.float64]:
        return self.factor @ self.factor.T

    def solve(self, b: ArrayLike) -> NDArray[np.float64]:
        """Solve ``A z = b`` for a vector or a stack of columns ``b``."""
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.dim:
            raise DimensionMismatch(f"rhs has leading dimension {b.shape[0]}, expected {self.dim}")
        return linalg.cho_solve((self.factor, True), b)

    def half_solve(self, b: ArrayLike) -> NDArray[np.float64]:
        """Return ``L^{-1} b`` so that ``<A^{-1} b, b> = ||L^{-1} b||^2``."""
        b = np.asarray(b, dtype=float)
        return linalg.solve_triangular(self.factor, b, lower=True)

    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.factor))))


def spd_factorize(A: ArrayLike) -> SpdFactor:
    """Cholesky-factorize a symmetric positive-definite matrix.

    Parameters
    ----------
    A : array_like, shape (d, d)
        Symmetric matrix (to within ``1e-12`` relative to its largest entry).

    Returns
    -------
    SpdFactor

    Raises
    ------
    NotPositiveDefinite
        If ``A`` is not positive definite, or if some squared pivot is at
        most ``1e-14 * trace(A) / d``. Degenerate inputs are never silently
        regularized.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {A.shape}")
    d = A.shape[0]
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if not np.allclose(A, A.T, rtol=0.0, atol=SYMMETRY_TOL * scale):
        raise NotPositiveDefinite("matrix is not symmetric")
    try:
        L = linalg.cholesky(A, lower=True, check_finite=True)
    except linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    threshold = PIVOT_RTOL * np.trace(A) / d
    pivots = np.diag(L) ** 2
    if threshold <= 0 or np.any(pivots <= threshold):
        raise NotPositiveDefinite(
            f"smallest pivot {pivots.min():.3e} below tolerance {threshold:.3e}"
        )
    return SpdFactor(dim=d, factor=L)


def quad_form_inv(F: SpdFactor, x: ArrayLike) -> float | NDArray[np.float64]:
    """Return ``<A^{-1} x, x>``.

    ``x`` may be a single vector of length ``d`` or an ``(m, d)`` array of
    row vectors, in which case one value per row is returned.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != F.dim:
        raise DimensionMismatch(f"vector of length {x.shape[-1]} for a {F.dim}x{F.dim} factor")
    if x.ndim == 1:
        w = F.half_solve(x)
        return float(w @ w)
    w = F.half_solve(x.T)
    return np.einsum("ij,ij->j", w, w)


def sherman_morrison_leverage(F: SpdFactor, v: ArrayLike):
    """Leverage of ``v`` after a rank-one update of ``S``.

    Returns ``(h, g)`` with ``g = <S^{-1} v, v>`` and
    ``h = <(S + v v^T)^{-1} v, v> = g / (1 + g)``, so that
    ``1 / (1 - h) = 1 + g``. Works row-wise for a stack of vectors.
    """
    g = quad_form_inv(F, v)
    h = g / (1.0 + g)
    return h, g


def degrees_of_freedom(Sigma: ArrayLike, lam: float) -> float:
    """Effective dimension ``tr[(Sigma + lam I)^{-1} Sigma]`` of ridge regression."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    eig = linalg.eigvalsh(Sigma)
    tol = 1e-10 * max(1.0, float(np.max(np.abs(eig))))
    if eig.min() < -tol:
        raise NotPSD(f"negative eigenvalue {eig.min():.3e}")
    eig = np.clip(eig, 0.0, None)
    return float(np.sum(eig / (eig + lam)))


def trace_inverse(F: SpdFactor) -> float:
    """``tr(A^{-1})`` computed as the squared Frobenius norm of ``L^{-1}``."""
    Linv = F.half_solve(np.eye(F.dim))
    return float(np.sum(Linv * Linv))


def sigmoid(u):
    """Logistic function ``e^u / (1 + e^u)``, overflow-free."""
    return expit(u)


def log_sigmoid(u):
    return log_expit(u)


def logistic_loss(u):
    """``log(1 + e^u)`` evaluated without overflow."""
    return np.logaddexp(0.0, u)
