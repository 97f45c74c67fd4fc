"""Simulation toolkit for layered, commutation-aware ADAPT-VQE variants."""

from __future__ import annotations

from .errors import (
    AdaptLayerError,
    ConfigError,
    NumericalError,
    OptimizerError,
    ParseError,
    ResourceError,
    ValidationError,
)
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "AdaptLayerError",
    "BACKEND",
    "ConfigError",
    "NumericalError",
    "OptimizerError",
    "ParseError",
    "ResourceError",
    "ValidationError",
]
