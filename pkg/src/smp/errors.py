"""Exception types raised across the package."""


class SMPError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(SMPError, ValueError):
    pass


class NotPositiveDefinite(SMPError, ValueError):
    """A Cholesky pivot fell below the relative tolerance."""


class NotPSD(SMPError, ValueError):
    pass


class SingularDesign(NotPositiveDefinite):
    """The empirical covariance of the design is (numerically) singular."""


class EmptySample(SMPError, ValueError):
    pass


class EmptyEstimate(SMPError, ValueError):
    pass


class MaxIterExceeded(SMPError, RuntimeError):
    """Newton solver did not reach the gradient tolerance.

    The last iterate and its gradient norm are kept on the exception so that
    callers can decide whether the result is usable.
    """

    def __init__(self, message, theta=None, grad_norm=None, iterations=None):
        super().__init__(message)
        self.theta = theta
        self.grad_norm = grad_norm
        self.iterations = iterations


class Inconclusive(SMPError, RuntimeError):
    """Separation could not be decided at the requested margin."""


class SeparationError(SMPError, ValueError):
    """Unpenalized logistic MLE requested on linearly separated data."""

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class StabilityViolation(SMPError, AssertionError):
    pass


class ConfigError(SMPError, ValueError):
    pass


class MissingTrainingData(SMPError, ValueError):
    pass


class TooManyFailures(SMPError, RuntimeError):
    pass


class DataError(SMPError, ValueError):
    """Malformed input data file; the message names the offending row."""
