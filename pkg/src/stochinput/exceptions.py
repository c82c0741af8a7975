"""Exception types raised by the numerical stages."""


class StochInputError(Exception):
    """Base class for all package-specific failures."""


class InsufficientDataError(StochInputError, ValueError):
    """Not enough samples or lags to perform the requested estimate."""


class IllPosedError(StochInputError, ValueError):
    """A linear problem is numerically rank deficient or singular."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class ConvergenceError(StochInputError, RuntimeError):
    """An iterative solver exhausted its iteration budget."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DegenerateProcessError(StochInputError, ValueError):
    """Autocorrelation data is inconsistent with a stationary process."""


class RealizationError(StochInputError, RuntimeError):
    """A state-space realization step produced an unusable model."""


class FilterDivergenceError(StochInputError, RuntimeError):
    """The Kalman filter hit a numerically singular innovation covariance."""
