"""Perturbed majority maps on the Cantor set: mean-field analysis, map
construction, Monte Carlo on dependency cones, exact oracles and
phase-diagram scans.
"""
from .errors import (
    DomainError,
    NoisyMapsError,
    NotFoundError,
    ResourceError,
    SpecParseError,
    TruncationError,
)

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "NoisyMapsError",
    "NotFoundError",
    "ResourceError",
    "SpecParseError",
    "TruncationError",
    "__version__",
]
