"""Exception types raised across the package.

All of them derive from ``ValueError`` so callers that only care about
"bad input" can catch one thing.
"""


class PathPropError(ValueError):
    """Base class for every error raised by pathprop."""


class InvalidGridError(PathPropError):
    pass


class InvalidParameterError(PathPropError):
    pass


class IncompatibleGridsError(PathPropError):
    pass


class InvalidTimeError(PathPropError):
    pass


class OutOfRangeError(PathPropError):
    pass


class InvalidStateError(PathPropError):
    pass


class EvaluationFailure(PathPropError):
    pass


class SingularFormError(PathPropError):
    pass


class OracleDomainError(PathPropError):
    pass


class ConvergenceFailure(PathPropError):
    """Extrapolation did not behave; ``diagnostics`` holds the raw ladder."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ResolutionError(PathPropError):
    """Grid too coarse (or too small) for the requested propagation."""

    def __init__(self, message, required_spacing=None):
        super().__init__(message)
        self.required_spacing = required_spacing
