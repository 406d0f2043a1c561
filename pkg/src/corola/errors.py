"""Exception types raised across the package."""


class CorolaError(Exception):
    """Base class for all package errors."""


class DimensionError(CorolaError, ValueError):
    """Array shapes do not agree."""


class InitializationError(CorolaError, ValueError):
    """Not enough frames to build the initial basis."""


class DegenerateInputError(CorolaError, ValueError):
    """Input carries no usable signal (e.g. all-zero frames)."""


class NoSupportError(CorolaError):
    """Every pixel is labelled foreground, so there is nothing to fit."""


class NumericalError(CorolaError, ArithmeticError):
    """A computation produced non-finite values."""


class DegenerateColumnError(NumericalError):
    """A basis column has zero curvature and cannot be updated."""


class EstimationFailed(CorolaError):
    """Image registration diverged."""


class FillError(CorolaError):
    """Missing-pixel reconstruction is impossible (zero coefficients)."""
