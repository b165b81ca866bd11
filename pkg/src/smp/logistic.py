"""Logistic regression: damped Newton solver, separation test and the SMP.

Samples are handled through ``z_i = -y_i x_i`` so that the log-loss of
``theta`` on ``(x_i, y_i)`` is ``log(1 + exp(<theta, z_i>))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import linalg
from scipy.optimize import linprog

from .errors import Inconclusive, MaxIterExceeded, SeparationError, StabilityViolation
from .numerics import log_sigmoid, logistic_loss, sigmoid

ARMIJO = 1e-4
GRAD_TOL = 1e-10
MAX_ITER = 100
MARGIN_TOL = 1e-7


@dataclass(frozen=True)
class LogisticFit:
    theta: NDArray[np.float64]
    lam: float
    iterations: int
    grad_norm: float
    separated: bool = False
    objective_trace: tuple = field(default=(), repr=False)


@dataclass(frozen=True)
class BernoulliPredictive:
    """Probability of the label ``+1``; always strictly inside ``(0, 1)``."""

    p_plus: NDArray[np.float64]

    def prob(self, y):
        return np.where(np.asarray(y) > 0, self.p_plus, 1.0 - self.p_plus)

    def log_density(self, y):
        return np.log(self.prob(y))


@dataclass(frozen=True)
class SeparationResult:
    separated: bool
    certificate: Optional[NDArray[np.float64]] = None
    margin: float = 0.0


def as_z(X: ArrayLike, y: ArrayLike) -> NDArray[np.float64]:
    """Stack ``z_i = -y_i x_i`` from a design and ``{-1, +1}`` labels."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    return -y[:, None] * X


def _weights(Z, weights):
    n = Z.shape[0]
    if weights is None:
        return np.full(n, 1.0 / n) if n else np.zeros(0)
    return np.asarray(weights, dtype=float)


def logistic_objective(theta, Z, lam, weights=None):
    """Value, gradient and Hessian of ``mean_i l(<theta, z_i>) + lam/2 ||theta||^2``.

    ``weights`` replaces the uniform ``1/n`` average when given. An empty
    ``Z`` leaves the penalty alone.
    """
    theta = np.asarray(theta, dtype=float)
    Z = np.atleast_2d(np.asarray(Z, dtype=float)).reshape(-1, theta.size)
    w = _weights(Z, weights)
    u = Z @ theta
    s = sigmoid(u)
    value = float(w @ logistic_loss(u)) + 0.5 * lam * float(theta @ theta)
    grad = Z.T @ (w * s) + lam * theta
    hess = (Z * (w * s * (1.0 - s))[:, None]).T @ Z + lam * np.eye(theta.size)
    return value, grad, hess


def newton_fit(
    Z: ArrayLike,
    lam: float,
    theta0: Optional[ArrayLike] = None,
    tol: float = GRAD_TOL,
    max_iter: int = MAX_ITER,
    weights=None,
) -> LogisticFit:
    """Minimize the ridge-penalized logistic objective by damped Newton.

    Steps are backtracked by halving until the Armijo condition holds (with
    constant ``1e-4``); if the Hessian solve fails the step falls back to the
    negative gradient. Once the objective stops resolving differences (at
    machine precision), a full step is still taken while it reduces the
    gradient norm without raising the objective by more than a few ulps.

    Raises
    ------
    MaxIterExceeded
        With the last iterate and gradient norm attached.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    Z = np.asarray(Z, dtype=float)
    theta = np.zeros(Z.shape[-1]) if theta0 is None else np.array(theta0, dtype=float)
    Z = Z.reshape(-1, theta.size)
    f, g, H = logistic_objective(theta, Z, lam, weights)
    trace = [f]
    gnorm = float(np.linalg.norm(g))
    for it in range(max_iter + 1):
        if gnorm <= tol:
            return LogisticFit(theta, float(lam), it, gnorm, False, tuple(trace))
        if it == max_iter:
            break
        try:
            step = -linalg.solve(H, g, assume_a="pos")
        except (linalg.LinAlgError, ValueError):
            step = -g
        slope = float(g @ step)
        if slope >= 0:
            step, slope = -g, -gnorm**2
        t = 1.0
        accepted = False
        while t > 1e-12:
            cand = theta + t * step
            f_new, g_new, H_new = logistic_objective(cand, Z, lam, weights)
            gn_new = float(np.linalg.norm(g_new))
            f_floor = f + 8 * np.finfo(float).eps * max(1.0, abs(f))
            if f_new <= f + ARMIJO * t * slope or (f_new <= f_floor and gn_new < gnorm):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        theta, f, g, H, gnorm = cand, f_new, g_new, H_new, gn_new
        trace.append(f)
    raise MaxIterExceeded(
        f"Newton stopped with gradient norm {gnorm:.3e} > {tol:.1e}",
        theta=theta, grad_norm=gnorm, iterations=len(trace) - 1,
    )


def separation_check(Z: ArrayLike, margin_tol: float = MARGIN_TOL) -> SeparationResult:
    """Decide whether some ``theta`` has ``<theta, z_i> < 0`` for every row.

    Solves the hinge relaxation ``min sum_i max(0, 1 + <theta, z_i>)`` as a
    linear program. Its optimum is ``0`` on separated data and at least ``1``
    otherwise; a separated answer is only returned together with a verified
    certificate of normalized margin at least ``margin_tol``. Zero rows carry
    a constant loss and are ignored.

    Raises
    ------
    Inconclusive
        When the LP optimum or the certificate sits between the two cases.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    Z = Z[np.any(Z != 0.0, axis=1)]
    n, d = Z.shape
    if n == 0:
        return SeparationResult(False)
    # variables (theta, s): min sum s  s.t.  Z theta - s <= -1, s >= 0
    c = np.concatenate([np.zeros(d), np.ones(n)])
    A = np.hstack([Z, -np.eye(n)])
    bounds = [(None, None)] * d + [(0, None)] * n
    res = linprog(c, A_ub=A, b_ub=-np.ones(n), bounds=bounds, method="highs")
    if res.status != 0:
        raise Inconclusive(f"hinge LP failed: {res.message}")
    if res.fun >= 0.5:
        return SeparationResult(False)
    theta = res.x[:d]
    norm = float(np.linalg.norm(theta))
    margin = -float(np.max(Z @ theta)) / norm if norm > 0 else 0.0
    scale = float(np.max(np.linalg.norm(Z, axis=1)))
    if res.fun > 1e-6 or margin < margin_tol * scale:
        raise Inconclusive(f"hinge optimum {res.fun:.3e}, certificate margin {margin:.3e}")
    return SeparationResult(True, theta / norm, margin)


def _span_basis(Z):
    _, s, Vt = np.linalg.svd(Z, full_matrices=False)
    if s.size == 0:
        return np.zeros((Z.shape[1], 0))
    rank = int(np.sum(s > s[0] * max(Z.shape) * np.finfo(float).eps))
    return Vt[:rank].T


def mle_fit(Z: ArrayLike, tol: float = GRAD_TOL, max_iter: int = MAX_ITER) -> LogisticFit:
    """Unpenalized logistic MLE.

    Raises :class:`SeparationError` with a separating direction when the
    data are linearly separated. When the rows do not span the whole space
    the minimizer is only unique along their span; the solution returned is
    the one with no component orthogonal to it.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    sep = separation_check(Z)
    if sep.separated:
        raise SeparationError("data are linearly separated; no finite MLE", sep.certificate)
    U = _span_basis(Z)
    if U.shape[1] == 0:
        return LogisticFit(np.zeros(Z.shape[1]), 0.0, 0, 0.0, False)
    fit = newton_fit(Z @ U, 0.0, tol=tol, max_iter=max_iter)
    return LogisticFit(U @ fit.theta, 0.0, fit.iterations, fit.grad_norm, False, fit.objective_trace)


def ridge_logistic_fit(X, y, lam, **kw) -> LogisticFit:
    return newton_fit(as_z(X, y), lam, **kw)


# ---------------------------------------------------------------- SMP


class LogisticSMP:
    """SMP for logistic regression on a fixed training set.

    Each prediction refits the model twice, once with the virtual sample
    ``(x, +1)`` and once with ``(x, -1)``, on the ``(n+1)``-averaged
    objective. With ``lam > 0`` the refits are warm-started from the
    penalized fit on the training data alone; by strong convexity the two
    minimizers lie within ``||x|| / (lam (n+1))`` of it.

    With ``lam = 0`` a refit on separated data has no finite minimizer; its
    contribution to the normalizer is then exactly ``1``.
    """

    def __init__(self, Z: ArrayLike, lam: float, tol: float = GRAD_TOL, max_iter: int = MAX_ITER):
        if lam < 0:
            raise ValueError("lambda must be nonnegative")
        self.Z = np.atleast_2d(np.asarray(Z, dtype=float))
        self.lam = float(lam)
        self.tol = tol
        self.max_iter = max_iter
        self.n, self.d = self.Z.shape
        self._base = None
        if self.lam > 0:
            self._base = newton_fit(self.Z, self.lam, tol=tol, max_iter=max_iter).theta

    def refit(self, z: NDArray[np.float64]) -> NDArray[np.float64]:
        """Penalized minimizer on the training rows plus the extra row ``z``."""
        Zz = np.vstack([self.Z, z[None, :]])
        return newton_fit(Zz, self.lam, theta0=self._base, tol=self.tol, max_iter=self.max_iter).theta

    def _unpenalized_term(self, z):
        # log f(y|x) at the refit, where z = -y x is the virtual row
        Zz = np.vstack([self.Z, z[None, :]])
        if separation_check(Zz).separated:
            return 0.0
        theta = mle_fit(Zz, tol=self.tol, max_iter=self.max_iter).theta
        return float(log_sigmoid(-theta @ z))

    def log_odds(self, x: NDArray[np.float64]) -> float:
        """``log f(+1|x) - log f(-1|x)`` of the SMP."""
        x = np.asarray(x, dtype=float)
        if not np.any(x):
            return 0.0
        if self.lam > 0:
            t_plus = self.refit(-x)
            t_minus = self.refit(x)
            log_a = log_sigmoid(t_plus @ x) - 0.5 * self.lam * (t_plus @ t_plus)
            log_b = log_sigmoid(-(t_minus @ x)) - 0.5 * self.lam * (t_minus @ t_minus)
            return float(log_a - log_b)
        return self._unpenalized_term(-x) - self._unpenalized_term(x)

    def predict(self, x: ArrayLike) -> BernoulliPredictive:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return BernoulliPredictive(np.asarray(sigmoid(self.log_odds(x))))
        return BernoulliPredictive(sigmoid(np.array([self.log_odds(row) for row in x])))

    def refits(self, x: ArrayLike):
        """``(theta_plus, theta_minus)``: refits with ``(x, +1)`` and ``(x, -1)``."""
        if self.lam <= 0:
            raise ValueError("refits need lam > 0")
        x = np.asarray(x, dtype=float)
        return self.refit(-x), self.refit(x)

    def sigma_gap(self, x: ArrayLike) -> float:
        """``sigma(<theta_plus, x>) - sigma(<theta_minus, x>)``, nonnegative.

        Its expectation over training sets and ``x`` upper-bounds the
        penalized excess risk of the SMP.
        """
        t_plus, t_minus = self.refits(x)
        return float(sigmoid(t_plus @ x) - sigmoid(t_minus @ x))


def smp_predict(Z_train: ArrayLike, x: ArrayLike, lam: float) -> BernoulliPredictive:
    return LogisticSMP(Z_train, lam).predict(x)


def ridge_smp_lambda_default(R: float, n: int) -> float:
    """``2 R^2 / (n+1)``, the smallest penalty covered by the excess-risk bound."""
    if not R > 0:
        raise ValueError("R must be positive")
    return 2.0 * R**2 / (n + 1)


def logistic_ridge_bound(d: int, B: float, R: float, n: int, shift: int = 0) -> float:
    """``(e d + B^2 R^2) / (n + shift)``; ``shift=1`` gives the ``n+1`` normalization."""
    return (math.e * d + B**2 * R**2) / (n + shift)


@dataclass(frozen=True)
class StabilityReport:
    distance: float
    distance_bound: float
    inner: float
    inner_bound: float
    R: float


def stability_check(Z: ArrayLike, x: ArrayLike, lam: float, R: Optional[float] = None) -> StabilityReport:
    """Check how far the two refits of one query move apart.

    Verifies ``||theta_plus - theta_minus|| <= ||x|| / (lam (n+1))`` and
    ``0 <= <theta_plus - theta_minus, x> <= 1/2``; the second inequality
    needs ``lam >= 2 R^2 / (n+1)`` with ``R`` bounding every sample norm.

    Raises
    ------
    StabilityViolation
        Carrying the measured quantities in its message.
    """
    smp = LogisticSMP(Z, lam)
    x = np.asarray(x, dtype=float)
    if R is None:
        R = float(max(np.max(np.linalg.norm(smp.Z, axis=1), initial=0.0), np.linalg.norm(x)))
    n = smp.n
    if lam < 2 * R**2 / (n + 1) * (1 - 1e-12):
        raise ValueError(f"lambda {lam:.3e} below 2 R^2/(n+1) = {2 * R**2 / (n + 1):.3e}")
    t_plus, t_minus = smp.refits(x)
    diff = t_plus - t_minus
    report = StabilityReport(
        distance=float(np.linalg.norm(diff)),
        distance_bound=float(np.linalg.norm(x)) / ((n + 1) * lam),
        inner=float(diff @ x),
        inner_bound=0.5,
        R=R,
    )
    slack = 1e-9 * (1.0 + report.distance_bound)
    if report.distance > report.distance_bound + slack or not (
        -slack <= report.inner <= report.inner_bound + slack
    ):
        raise StabilityViolation(f"stability inequalities violated: {report}")
    return report
