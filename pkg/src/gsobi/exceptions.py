"""Exception types shared across the package."""


class GsobiError(Exception):
    """Base class for all package errors."""


class ValidationError(GsobiError, ValueError):
    """Invalid input data or parameters."""


class InsufficientDataError(ValidationError):
    """Sample too short for the requested operation."""


class LagTooLargeError(ValidationError):
    """Requested lag does not fit in the sample."""


class DivergentMomentError(ValidationError):
    """A requested theoretical moment does not exist for the parameters."""


class SingularMatrixError(GsobiError):
    """Matrix is singular or not positive definite.

    ``eigenvalue`` carries the offending eigenvalue when known.
    """

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class ConvergenceError(GsobiError):
    """Iterative routine failed to converge.

    ``residual`` carries the final off-diagonal mass or objective residual
    when known.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ModelFitError(GsobiError):
    """All candidate model fits failed."""
