"""Divergences, analytic conditional risks and the excess-risk Monte Carlo.

Only the covariates and the training sample are simulated. Given ``x``, the
expectation over ``Y`` is taken in closed form from the generator's
conditional moments, which removes most of the Monte Carlo noise.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DimensionMismatch
from .gaussian import GaussianDensity, ScalarGaussianPredictive
from .generators import (
    GaussianLocationGenerator,
    LinearGaussianGenerator,
    LogisticGenerator,
    MultinomialGenerator,
)
from .logistic import BernoulliPredictive, newton_fit
from .montecarlo import RiskEstimate, run_replicates
from .numerics import log_sigmoid, spd_factorize


# ---------------------------------------------------------------- divergences


def kl_categorical(p, q) -> float:
    """``sum p log(p/q)`` with ``0 log 0 = 0``; ``+inf`` if ``p`` puts mass where ``q`` has none."""
    p = np.asarray(getattr(p, "probs", p), dtype=float)
    q = np.asarray(getattr(q, "probs", q), dtype=float)
    if p.shape != q.shape:
        raise DimensionMismatch("alphabets differ")
    mask = p > 0
    if np.any(q[mask] == 0):
        return math.inf
    return float(np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask]))))


def cross_entropy_categorical(p, q) -> float:
    return kl_categorical(p, q) - float(np.sum(_xlogx(np.asarray(getattr(p, "probs", p)))))


def _xlogx(p):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)


def gaussian_cross_entropy(mean, cov, q: GaussianDensity) -> float:
    """``E[-log q(Y)]`` for any ``Y`` with the given mean and covariance.

    Only the first two moments of ``Y`` enter, so this holds for non-Gaussian
    laws too.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if mean.size != q.d or cov.shape != (q.d, q.d):
        raise DimensionMismatch("dimension mismatch between moments and density")
    F = spd_factorize(np.atleast_2d(q.cov))
    r = mean - np.atleast_1d(q.mean)
    w = F.half_solve(r)
    trace = float(np.trace(F.solve(cov)))
    return 0.5 * (q.d * math.log(2 * math.pi) + F.logdet() + trace + float(w @ w))


def kl_gaussian(p: GaussianDensity, q: GaussianDensity) -> float:
    if np.size(p.mean) != np.size(q.mean):
        raise DimensionMismatch("dimension mismatch")
    entropy = 0.5 * (p.d * (1 + math.log(2 * math.pi)) + spd_factorize(np.atleast_2d(p.cov)).logdet())
    return max(0.0, gaussian_cross_entropy(p.mean, p.cov, q) - entropy)


# ---------------------------------------------------------------- conditional risks


def _predict(pred, x):
    return pred(x) if callable(pred) else pred


def gaussian_conditional_losses(pred: ScalarGaussianPredictive, m, s2) -> NDArray[np.float64]:
    """Per-query ``E[-log pred(Y|x)]`` w.r.t. ``(2 pi)^{-1/2} dy`` given ``E[Y|x]`` and ``Var[Y|x]``."""
    mu = np.asarray(pred.mean, dtype=float)
    var = np.asarray(pred.variance, dtype=float)
    return 0.5 * ((m - mu) ** 2 + s2) / var + 0.5 * np.log(var)


def risk_gaussian_conditional(pred, gen: LinearGaussianGenerator, x_samples: ArrayLike) -> float:
    """Average over ``x_samples`` of the analytic conditional log-loss.

    ``pred`` maps a stack of queries to a :class:`ScalarGaussianPredictive`.
    """
    x = np.atleast_2d(np.asarray(x_samples, dtype=float))
    losses = gaussian_conditional_losses(_predict(pred, x), gen.conditional_mean(x),
                                         gen.conditional_variance(x))
    return float(np.mean(losses))


def bernoulli_conditional_losses(p_plus, eta) -> NDArray[np.float64]:
    p = np.asarray(p_plus, dtype=float)
    with np.errstate(divide="ignore"):
        lp = np.where(eta > 0, -eta * np.log(p), 0.0)
        lm = np.where(eta < 1, -(1 - eta) * np.log1p(-p), 0.0)
    return lp + lm


def risk_bernoulli_conditional(pred, gen: LogisticGenerator, x_samples: ArrayLike) -> float:
    """Average over ``x_samples`` of ``-eta log p - (1 - eta) log(1 - p)``."""
    x = np.atleast_2d(np.asarray(x_samples, dtype=float))
    out = _predict(pred, x)
    p = out.p_plus if isinstance(out, BernoulliPredictive) else out
    return float(np.mean(bernoulli_conditional_losses(p, gen.eta(x))))


def logistic_risk_terms(theta, x, eta):
    """Per-query log-loss of ``f_theta`` with the label integrated out."""
    u = x @ theta
    return -(eta * log_sigmoid(u) + (1 - eta) * log_sigmoid(-u))


# ---------------------------------------------------------------- comparators


@dataclass(frozen=True)
class Comparator:
    """Parameter of the in-model reference predictor, with the penalty it carries.

    The excess risk reported is ``R(pred) - R(f_theta) - penalty``.
    """

    theta: NDArray[np.float64]
    penalty: float = 0.0


def linear_oracle(gen: LinearGaussianGenerator) -> Comparator:
    return Comparator(gen.best_linear())


def linear_penalized_oracle(gen: LinearGaussianGenerator, lam: float) -> Comparator:
    """Minimizer of ``R(f_theta) + lam/2 ||theta||^2`` for a linear conditional mean."""
    Sigma = gen.design.covariance
    theta_star = gen.best_linear()
    theta = np.linalg.solve(Sigma + lam * np.eye(gen.d), Sigma @ theta_star)
    return Comparator(theta, 0.5 * lam * float(theta @ theta))


def _ball_bisection(solve_penalized, B, mu_hi=1.0, iters=200):
    theta = solve_penalized(0.0)
    if np.linalg.norm(theta) <= B:
        return theta
    lo, hi = 0.0, mu_hi
    while np.linalg.norm(solve_penalized(hi)) > B:
        lo, hi = hi, 2 * hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if np.linalg.norm(solve_penalized(mid)) > B:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * max(hi, 1e-300):
            break
    return solve_penalized(hi)


def linear_best_in_ball(gen: LinearGaussianGenerator, B: float) -> Comparator:
    """``argmin ||theta - theta*||_Sigma`` over ``||theta|| <= B``, from the KKT condition."""
    Sigma = gen.design.covariance
    target = Sigma @ gen.best_linear()
    eye = np.eye(gen.d)
    theta = _ball_bisection(lambda mu: np.linalg.solve(Sigma + mu * eye, target), B)
    return Comparator(theta)


_BALL_CACHE: dict = {}


def logistic_best_in_ball(
    gen: LogisticGenerator, B: float, n_samples: int = 10**6, seed: int = 0
) -> Comparator:
    """Best logistic parameter in the ball of radius ``B``, from a large sample.

    The population risk is replaced by its average over ``n_samples`` draws
    of ``X`` with the label integrated out through ``eta(x)``. The
    constrained minimizer is found from the KKT condition: a bisection on the
    multiplier ``mu`` of ``mu/2 ||theta||^2``, each point solved by Newton.
    Results are cached per generator configuration.
    """
    key = hashlib.sha256(repr((gen, B, n_samples, seed)).encode()).hexdigest()
    if key in _BALL_CACHE:
        return _BALL_CACHE[key]
    rng = np.random.default_rng([int(seed), 0xBA11])
    x = gen.design.sample(rng, n_samples)
    eta = gen.eta(x)
    Z = np.vstack([-x, x])
    w = np.concatenate([eta, 1.0 - eta]) / n_samples
    state = {"theta": np.zeros(gen.d)}

    def solve(mu):
        fit = newton_fit(Z, mu, theta0=state["theta"], weights=w, tol=1e-12)
        state["theta"] = fit.theta
        return fit.theta

    theta = _ball_bisection(solve, B)
    out = Comparator(theta)
    _BALL_CACHE[key] = out
    return out


def logistic_oracle(gen: LogisticGenerator, **kw) -> Comparator:
    if gen.well_specified:
        return Comparator(np.asarray(gen.theta, dtype=float))
    return logistic_best_in_ball(gen, math.inf, **kw)


# ---------------------------------------------------------------- Monte Carlo


def _location_baseline(gen: GaussianLocationGenerator) -> float:
    return gaussian_cross_entropy(gen.mean, gen.cov, GaussianDensity(gen.mean, gen.model_cov))


def replicate_excess(predictor, gen, rng: np.random.Generator, comparator: Optional[Comparator],
                     n_test: int, baseline: Optional[float] = None) -> float:
    """Excess risk of one fitted predictor, integrating ``Y`` analytically.

    ``baseline`` optionally caches the best in-model risk of a location family.
    """
    if isinstance(gen, MultinomialGenerator):
        return kl_categorical(gen.p, predictor)
    if isinstance(gen, GaussianLocationGenerator):
        best = _location_baseline(gen) if baseline is None else baseline
        return gaussian_cross_entropy(gen.mean, gen.cov, predictor) - best
    x = gen.design.sample(rng, n_test)
    if isinstance(gen, LinearGaussianGenerator):
        m, s2 = gen.conditional_mean(x), gen.conditional_variance(x)
        ours = gaussian_conditional_losses(_predict(predictor, x), m, s2)
        ref = 0.5 * ((m - x @ comparator.theta) ** 2 + s2)
        return float(np.mean(ours - ref)) - comparator.penalty
    if isinstance(gen, LogisticGenerator):
        eta = gen.eta(x)
        out = _predict(predictor, x)
        p = out.p_plus if isinstance(out, BernoulliPredictive) else out
        ours = bernoulli_conditional_losses(p, eta)
        ref = logistic_risk_terms(comparator.theta, x, eta)
        return float(np.mean(ours - ref)) - comparator.penalty
    raise TypeError(f"unsupported generator {type(gen).__name__}")


def default_comparator(gen) -> Optional[Comparator]:
    if isinstance(gen, LinearGaussianGenerator):
        return linear_oracle(gen)
    if isinstance(gen, LogisticGenerator):
        return logistic_oracle(gen)
    return None


def excess_risk_mc(
    estimator: Callable,
    gen,
    n: int,
    replicates: int,
    seed: int,
    comparator: Optional[Comparator] = None,
    bound: Optional[float] = None,
    n_test: int = 1,
    n_jobs: Optional[int] = None,
) -> RiskEstimate:
    """Monte Carlo estimate of the expected excess risk of ``estimator``.

    Parameters
    ----------
    estimator : callable
        Maps a training sample (counts, an ``(n, d)`` array, or ``(X, y)``)
        to a predictor: a density for unconditional families, or a callable
        from a stack of queries to a predictive for conditional ones.
    gen : generator
        One of the classes of :mod:`smp.generators`.
    comparator : Comparator, optional
        Reference parameter for conditional families; defaults to the
        oracle of a well-specified model.
    n_test : int
        Fresh covariates drawn per replicate to integrate over ``X``.

    Replicates that raise a package error are counted in ``failures``; the
    run fails if more than 1% do.
    """
    if comparator is None:
        comparator = default_comparator(gen)
    baseline = _location_baseline(gen) if isinstance(gen, GaussianLocationGenerator) else None

    def one(rng):
        sample = gen.sample(rng, n)
        return replicate_excess(estimator(sample), gen, rng, comparator, n_test, baseline)

    values, failures = run_replicates(one, replicates, seed, n_jobs)
    return RiskEstimate.from_values(values, bound=bound, failures=failures)
