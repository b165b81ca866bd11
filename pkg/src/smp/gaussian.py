"""Gaussian location and Gaussian linear conditional density estimation.

The conditional model is ``N(<theta, x>, 1)``. Log-losses are taken with
respect to the base measure ``(2 pi)^{-1/2} dy``, so the log-loss of
``N(mu, s2)`` at ``y`` is ``(y - mu)^2 / (2 s2) + log(s2) / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import EmptySample, NotPositiveDefinite, SingularDesign
from .generators import Design, StandardGaussianDesign, RademacherDesign
from .montecarlo import RiskEstimate, run_replicates
from .numerics import SpdFactor, quad_form_inv, spd_factorize


@dataclass(frozen=True)
class GaussianDensity:
    mean: NDArray[np.float64]
    cov: NDArray[np.float64]

    @property
    def d(self):
        return np.asarray(self.mean).size

    def log_density(self, y):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        F = spd_factorize(self.cov)
        r = y - self.mean
        q = quad_form_inv(F, r)
        return -0.5 * (q + F.logdet() + self.d * math.log(2 * math.pi))


@dataclass(frozen=True)
class ScalarGaussianPredictive:
    """Predictive ``N(mean, variance)`` for one query or a batch of queries."""

    mean: NDArray[np.float64]
    variance: NDArray[np.float64]

    def log_density(self, y):
        """Log-density w.r.t. ``(2 pi)^{-1/2} dy``."""
        return -0.5 * (np.asarray(y) - self.mean) ** 2 / self.variance - 0.5 * np.log(self.variance)


@dataclass(frozen=True)
class LinearGaussianFit:
    """Least-squares or ridge fit.

    ``gram`` factors ``X^T X`` for OLS and ``X^T X + lam (n+1) I`` for ridge,
    which is the matrix the SMP needs. ``xty`` is ``X^T y``.
    """

    theta: NDArray[np.float64]
    gram: SpdFactor
    lam: float
    n: int
    xty: NDArray[np.float64]


# ---------------------------------------------------------------- location


def _location_sample(sample):
    Y = np.asarray(sample, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[0] == 0:
        raise EmptySample("need at least one observation")
    return Y


def location_mle(sample: ArrayLike, Sigma: ArrayLike) -> GaussianDensity:
    Y = _location_sample(sample)
    return GaussianDensity(Y.mean(axis=0), np.atleast_2d(np.asarray(Sigma, dtype=float)))


def location_smp(sample: ArrayLike, Sigma: ArrayLike) -> GaussianDensity:
    """SMP of the location family: ``N(mean(Y), (1 + 1/n)^2 Sigma)``."""
    Y = _location_sample(sample)
    n = Y.shape[0]
    return GaussianDensity(Y.mean(axis=0), (1.0 + 1.0 / n) ** 2 * np.atleast_2d(Sigma))


def location_minimax(sample: ArrayLike, Sigma: ArrayLike) -> GaussianDensity:
    """Bayes predictive under a flat prior: ``N(mean(Y), (1 + 1/n) Sigma)``.

    Its expected excess risk is ``(d/2) log(1 + 1/n)`` for every
    distribution with a finite second moment.
    """
    Y = _location_sample(sample)
    n = Y.shape[0]
    return GaussianDensity(Y.mean(axis=0), (1.0 + 1.0 / n) * np.atleast_2d(Sigma))


def location_smp_bound(n: int, d: int) -> float:
    return d * math.log1p(1.0 / n)


def location_smp_wellspecified_risk(n: int, d: int) -> float:
    """Exact expected excess risk of the SMP when ``Y ~ N(theta*, Sigma)``.

    Equals ``d log(1 + 1/n) - d / (2 (n+1))``: the slack term is half the
    expected squared Mahalanobis error of the mean of ``n+1`` points.
    """
    return d * math.log1p(1.0 / n) - d / (2.0 * (n + 1))


def location_minimax_risk(n: int, d: int) -> float:
    return 0.5 * d * math.log1p(1.0 / n)


# ---------------------------------------------------------------- linear


def _design(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
    return X, y


def ols_fit(X: ArrayLike, y: ArrayLike) -> LinearGaussianFit:
    """Ordinary least squares; raises :class:`SingularDesign` if ``X^T X`` is singular."""
    X, y = _design(X, y)
    n, d = X.shape
    if n < d:
        raise SingularDesign(f"n = {n} < d = {d}")
    try:
        gram = spd_factorize(X.T @ X)
    except NotPositiveDefinite as exc:
        raise SingularDesign(str(exc)) from None
    xty = X.T @ y
    return LinearGaussianFit(gram.solve(xty), gram, 0.0, n, xty)


def ridge_fit(X: ArrayLike, y: ArrayLike, lam: float) -> LinearGaussianFit:
    """Ridge estimator ``(Sigma_n + lam I)^{-1} S_n``.

    ``lam`` multiplies ``||theta||^2 / 2`` next to the *average* squared
    loss. The returned ``gram`` is the SMP matrix ``X^T X + lam (n+1) I``.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    X, y = _design(X, y)
    n, d = X.shape
    xtx = X.T @ X
    xty = X.T @ y
    if n == 0:
        theta = np.zeros(d)
    else:
        theta = spd_factorize(xtx + n * lam * np.eye(d)).solve(xty)
    gram = spd_factorize(xtx + lam * (n + 1) * np.eye(d))
    return LinearGaussianFit(theta, gram, float(lam), n, xty)


def linear_smp_predict(fit: LinearGaussianFit, x: ArrayLike) -> ScalarGaussianPredictive:
    """SMP of the Gaussian linear model at ``x`` (one query or a stack of rows).

    The mean is the OLS prediction; the variance is ``(1 + leverage)^2`` with
    leverage ``<(X^T X)^{-1} x, x>``. Near-interpolating designs can give
    very large variances; they are returned as is.
    """
    if fit.lam != 0:
        raise ValueError("linear_smp_predict expects an OLS fit; use ridge_smp_predict")
    x = np.asarray(x, dtype=float)
    g = quad_form_inv(fit.gram, x)
    return ScalarGaussianPredictive(np.asarray(x @ fit.theta), np.asarray((1.0 + g) ** 2))


def ridge_smp_from_fit(fit: LinearGaussianFit, x: ArrayLike) -> ScalarGaussianPredictive:
    """Ridge-penalized SMP, evaluated with one factorization for all queries.

    With ``A = X^T X + lam (n+1) I`` and ``K = (A + x x^T)^{-1}``, a rank-one
    update gives ``K x = A^{-1} x / (1 + g)`` where ``g = <A^{-1} x, x>``.
    Plugging this into

        sigma^2 = ((1 - ||x||_K^2)^2 + lam ||K x||^2)^{-1}
        mu      = <theta', x> - lam sigma^2 <theta', K x>

    with ``theta' = A^{-1} X^T y`` (the ridge fit at ``lam (n+1) / n``)
    needs only triangular solves against ``A``.
    """
    lam = fit.lam
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xs = np.atleast_2d(x)
    theta_p = fit.gram.solve(fit.xty)
    w = fit.gram.solve(xs.T).T  # rows A^{-1} x
    g = np.einsum("ij,ij->i", w, xs)
    one_plus_g = 1.0 + g
    lev = g / one_plus_g
    kx_sq = np.einsum("ij,ij->i", w, w) / one_plus_g**2
    var = 1.0 / ((1.0 - lev) ** 2 + lam * kx_sq)
    mean = xs @ theta_p - lam * var * (w @ theta_p) / one_plus_g
    if single:
        return ScalarGaussianPredictive(mean[0], var[0])
    return ScalarGaussianPredictive(mean, var)


def ridge_smp_predict(X: ArrayLike, y: ArrayLike, lam: float, x: ArrayLike) -> ScalarGaussianPredictive:
    return ridge_smp_from_fit(ridge_fit(X, y, lam), x)


def plugin_predict(fit: LinearGaussianFit, x: ArrayLike, variance: float = 1.0) -> ScalarGaussianPredictive:
    """Proper plug-in density ``N(<theta, x>, variance)``."""
    x = np.asarray(x, dtype=float)
    mean = np.asarray(x @ fit.theta)
    return ScalarGaussianPredictive(mean, np.full_like(mean, float(variance), dtype=float))


def ridge_log_norm_lambda(B: float, n: int, d: int) -> float:
    """Penalty ``d / (B^2 (n+1))`` for comparison with the ball of radius ``B``."""
    if not B > 0:
        raise ValueError("B must be positive")
    return d / (B**2 * (n + 1))


def ridge_log_norm_bound(B: float, R: float, n: int, d: int) -> float:
    return 5.0 * d * math.log(2.0 + B * R / math.sqrt(d)) / (n + 1)


def ridge_df_bound(df: float, n: int) -> float:
    return 1.25 * df / (n + 1)


# ---------------------------------------------------------------- design statistics


def gaussian_design_trace(n: int, d: int) -> float:
    """``E[tr(Sigma_tilde_n^{-1})] = n d / (n - d - 1)`` for Gaussian designs."""
    if n <= d + 1:
        return math.inf
    return n * d / (n - d - 1.0)


def linear_smp_bound_value(mean_trace: float, n: int) -> float:
    return math.log1p(mean_trace / n)


def _rescaled_trace(X, chol_cov):
    n = X.shape[0]
    try:
        F = spd_factorize(X.T @ X)
    except NotPositiveDefinite as exc:
        raise SingularDesign(str(exc)) from None
    # tr(Sigma_tilde^{-1}) = n tr(Sigma (X^T X)^{-1}) = n ||L^{-1} C||_F^2
    M = F.half_solve(chol_cov)
    return n * float(np.sum(M * M))


def mean_trace_inverse_mc(design: Design, n: int, replicates: int, seed: int, n_jobs=None) -> RiskEstimate:
    """Monte Carlo estimate of ``E[tr(Sigma_tilde_n^{-1})]`` for ``design``."""
    chol_cov = np.linalg.cholesky(design.covariance)
    values, failures = run_replicates(
        lambda rng: _rescaled_trace(design.sample(rng, n), chol_cov), replicates, seed, n_jobs
    )
    exact = gaussian_design_trace(n, design.d) if _is_gaussian(design) else None
    return RiskEstimate.from_values(values, bound=exact, failures=failures)


def _is_gaussian(design):
    return isinstance(design, StandardGaussianDesign)


def linear_smp_bound_mc(design: Design, n: int, replicates: int, seed: int, n_jobs=None) -> RiskEstimate:
    """Estimate ``log(1 + E[tr(Sigma_tilde_n^{-1})] / n)``.

    The standard error comes from the delta method. ``bound`` holds the
    exact value where it is known in closed form (Gaussian designs, and
    one-dimensional Rademacher designs where ``Sigma_tilde_n = 1``).
    """
    if n <= design.d:
        raise ValueError("need n > d")
    tr = mean_trace_inverse_mc(design, n, replicates, seed, n_jobs)
    value = linear_smp_bound_value(tr.mean, n)
    exact = None
    if _is_gaussian(design):
        exact = linear_smp_bound_value(gaussian_design_trace(n, design.d), n)
    elif isinstance(design, RademacherDesign) and design.d == 1:
        exact = math.log1p(1.0 / n)
    return RiskEstimate(value, tr.std_err / (n + tr.mean), tr.replicates, exact, tr.failures)
