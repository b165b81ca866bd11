"""Density estimation on a finite alphabet of ``d`` symbols."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import EmptySample


@dataclass(frozen=True)
class CategoricalDensity:
    probs: NDArray[np.float64]

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must be a nonnegative vector summing to one")
        object.__setattr__(self, "probs", p)

    @property
    def d(self) -> int:
        return self.probs.size

    def log_density(self, y):
        """Log-probability of symbol(s) ``y``; ``-inf`` on zero-mass symbols."""
        with np.errstate(divide="ignore"):
            return np.log(self.probs[np.asarray(y)])


def _counts(counts: ArrayLike) -> NDArray[np.int64]:
    c = np.asarray(counts)
    if c.ndim != 1 or c.size == 0:
        raise ValueError("counts must be a nonempty vector")
    if np.any(c < 0) or not np.all(np.equal(np.mod(c, 1), 0)):
        raise ValueError("counts must be nonnegative integers")
    return c.astype(np.int64)


def multinomial_mle(counts: ArrayLike) -> CategoricalDensity:
    """Empirical frequencies ``N(y) / n``; may put zero mass on unseen symbols."""
    c = _counts(counts)
    n = int(c.sum())
    if n == 0:
        raise EmptySample("MLE needs at least one observation")
    return CategoricalDensity(c / n)


def multinomial_smp(counts: ArrayLike) -> CategoricalDensity:
    """Sample minmax predictor for the multinomial model (Laplace's rule).

    Each symbol receives ``(N(y) + 1) / (n + d)``, which is strictly
    positive even for ``n = 0``.
    """
    c = _counts(counts)
    return CategoricalDensity((c + 1.0) / (c.sum() + c.size))


def multinomial_excess_risk_bound(n: int, d: int) -> float:
    """``log((n + d) / (n + 1))``, attained when the true law is a point mass."""
    if n < 0 or d < 1:
        raise ValueError("need n >= 0 and d >= 1")
    return math.log1p((d - 1) / (n + 1))
