"""Exception types raised across the toolkit."""


class TFWaterError(Exception):
    """Base class for toolkit errors."""


class DomainError(TFWaterError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class GridTooSmallError(TFWaterError):
    """The sampling grid does not cover the decay region of a symbol."""


class ConvergenceError(TFWaterError, RuntimeError):
    """An iterative solver failed to meet its tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
