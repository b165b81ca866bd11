"""Data generators with closed-form conditional moments.

Every generator can draw a training sample and exposes what the risk module
needs to integrate the response analytically: the true law for unconditional
families, and ``m(x)``, ``s^2(x)`` or ``eta(x)`` for conditional ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.typing import NDArray

from .numerics import sigmoid


# ---------------------------------------------------------------- designs


class Design:
    d: int

    def sample(self, rng: np.random.Generator, n: int) -> NDArray[np.float64]:
        raise NotImplementedError

    @property
    def covariance(self) -> NDArray[np.float64]:
        raise NotImplementedError

    @property
    def radius(self) -> Optional[float]:
        """Almost-sure bound on ``||X||``, or ``None`` for unbounded designs."""
        return None


@dataclass(frozen=True)
class StandardGaussianDesign(Design):
    d: int
    cov: Optional[NDArray[np.float64]] = None

    def sample(self, rng, n):
        z = rng.standard_normal((n, self.d))
        if self.cov is None:
            return z
        return z @ np.linalg.cholesky(self.cov).T

    @property
    def covariance(self):
        return np.eye(self.d) if self.cov is None else np.asarray(self.cov, dtype=float)


@dataclass(frozen=True)
class RademacherDesign(Design):
    """Coordinates ``scale_j * eps_j`` with independent random signs.

    Every draw has the same norm ``||scales||``, and the covariance is
    ``diag(scales^2)``.
    """

    d: int
    scales: Optional[NDArray[np.float64]] = None

    def _scales(self):
        return np.ones(self.d) if self.scales is None else np.asarray(self.scales, dtype=float)

    def sample(self, rng, n):
        signs = rng.integers(0, 2, size=(n, self.d)) * 2.0 - 1.0
        return signs * self._scales()

    @property
    def covariance(self):
        return np.diag(self._scales() ** 2)

    @property
    def radius(self):
        return float(np.linalg.norm(self._scales()))


@dataclass(frozen=True)
class BoundedSphereDesign(Design):
    """Uniform on the sphere of radius ``R``, so ``||X|| = R`` exactly."""

    d: int
    R: float = 1.0

    def sample(self, rng, n):
        z = rng.standard_normal((n, self.d))
        return self.R * z / np.linalg.norm(z, axis=1, keepdims=True)

    @property
    def covariance(self):
        return (self.R**2 / self.d) * np.eye(self.d)

    @property
    def radius(self):
        return float(self.R)


@dataclass(frozen=True)
class TableDesign(Design):
    """Draws rows of a fixed table, with optional weights."""

    points: NDArray[np.float64]
    probs: Optional[NDArray[np.float64]] = None

    @property
    def d(self):
        return np.asarray(self.points).shape[1]

    def _p(self):
        m = np.asarray(self.points).shape[0]
        return np.full(m, 1.0 / m) if self.probs is None else np.asarray(self.probs, dtype=float)

    def sample(self, rng, n):
        pts = np.asarray(self.points, dtype=float)
        return pts[rng.choice(pts.shape[0], size=n, p=self._p())]

    @property
    def covariance(self):
        pts = np.asarray(self.points, dtype=float)
        return (pts * self._p()[:, None]).T @ pts

    @property
    def radius(self):
        return float(np.max(np.linalg.norm(self.points, axis=1)))


# ---------------------------------------------------------------- noise


@dataclass(frozen=True)
class GaussianNoise:
    variance: float = 1.0

    def sample(self, rng, x):
        return np.sqrt(self.variance) * rng.standard_normal(x.shape[0])

    def conditional_variance(self, x):
        return np.full(np.shape(x)[0], float(self.variance))


@dataclass(frozen=True)
class StudentTNoise:
    """Student-t noise rescaled to the requested variance (needs ``nu > 2``)."""

    nu: float = 5.0
    variance: float = 1.0

    def __post_init__(self):
        if not self.nu > 2:
            raise ValueError("Student-t noise needs nu > 2 for a finite variance")

    def sample(self, rng, x):
        scale = np.sqrt(self.variance * (self.nu - 2.0) / self.nu)
        return scale * rng.standard_t(self.nu, size=x.shape[0])

    def conditional_variance(self, x):
        return np.full(np.shape(x)[0], float(self.variance))


@dataclass(frozen=True)
class HeteroscedasticNoise:
    variance_fn: Callable[[NDArray[np.float64]], NDArray[np.float64]]

    def sample(self, rng, x):
        return np.sqrt(self.variance_fn(x)) * rng.standard_normal(x.shape[0])

    def conditional_variance(self, x):
        return np.asarray(self.variance_fn(x), dtype=float)


# ---------------------------------------------------------------- families


@dataclass(frozen=True)
class MultinomialGenerator:
    p: NDArray[np.float64]

    @property
    def d(self):
        return np.asarray(self.p).size

    def sample(self, rng, n):
        return rng.multinomial(n, np.asarray(self.p, dtype=float))


@dataclass(frozen=True)
class GaussianLocationGenerator:
    """``Y = mean + cov^{1/2} W`` with ``W`` Gaussian or unit-variance Student-t.

    ``model_cov`` is the fixed covariance of the fitted location family; it
    equals ``cov`` in the well-specified case.
    """

    mean: NDArray[np.float64]
    cov: NDArray[np.float64]
    model_cov: NDArray[np.float64]
    noise: str = "gaussian"
    nu: float = 5.0

    @property
    def d(self):
        return np.asarray(self.mean).size

    def sample(self, rng, n):
        d = self.d
        if self.noise == "gaussian":
            w = rng.standard_normal((n, d))
        elif self.noise == "student_t":
            w = rng.standard_t(self.nu, size=(n, d)) * np.sqrt((self.nu - 2.0) / self.nu)
        else:
            raise ValueError(f"unknown noise {self.noise!r}")
        return np.asarray(self.mean) + w @ np.linalg.cholesky(self.cov).T


@dataclass(frozen=True)
class LinearGaussianGenerator:
    """``Y = <theta, X> + noise``; misspecification enters through the noise."""

    theta: NDArray[np.float64]
    design: Design
    noise: object = field(default_factory=GaussianNoise)

    @property
    def d(self):
        return self.design.d

    def sample(self, rng, n):
        X = self.design.sample(rng, n)
        return X, self.conditional_mean(X) + self.noise.sample(rng, X)

    def conditional_mean(self, x):
        return np.asarray(x, dtype=float) @ np.asarray(self.theta, dtype=float)

    def conditional_variance(self, x):
        return self.noise.conditional_variance(np.atleast_2d(x))

    def best_linear(self):
        return np.asarray(self.theta, dtype=float)


@dataclass(frozen=True)
class LogisticGenerator:
    """Labels in ``{-1, +1}`` with ``P(Y=1 | X=x) = eta(x)``.

    ``eta`` defaults to the well-specified ``sigmoid(<theta, x>)``; pass
    ``eta_fn`` for a misspecified conditional.
    """

    design: Design
    theta: Optional[NDArray[np.float64]] = None
    eta_fn: Optional[Callable[[NDArray[np.float64]], NDArray[np.float64]]] = None

    @property
    def d(self):
        return self.design.d

    @property
    def well_specified(self):
        return self.eta_fn is None

    def eta(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.eta_fn is not None:
            return np.asarray(self.eta_fn(x), dtype=float)
        return sigmoid(x @ np.asarray(self.theta, dtype=float))

    def sample(self, rng, n):
        X = self.design.sample(rng, n)
        y = np.where(rng.random(n) < self.eta(X), 1.0, -1.0)
        return X, y
