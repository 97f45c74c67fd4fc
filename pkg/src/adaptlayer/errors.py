"""Exception hierarchy shared by every module."""

from __future__ import annotations


class AdaptLayerError(Exception):
    """Base class for all package errors."""


class ParseError(AdaptLayerError, ValueError):
    """Malformed input text; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ValidationError(AdaptLayerError, ValueError):
    """Argument or object failed a consistency check."""


class ResourceError(AdaptLayerError):
    """Requested computation exceeds a configured size limit."""


class NumericalError(AdaptLayerError, ArithmeticError):
    """A quantity that must be finite or real was not."""


class OptimizerError(AdaptLayerError):
    """The parameter optimizer failed to produce a usable result."""


class ConfigError(AdaptLayerError, ValueError):
    """Invalid run configuration."""
