"""Numerical laboratory for the infinite Kuramoto model."""

from .ensemble import FrequencyState, FrequencyVector, PhaseState
from .topology import (
    Explicit,
    FiniteEmbedded,
    Geometric,
    GeometricCross,
    PowerLaw,
    ProductSummable,
    Sender,
    UniformFinite,
)

__version__ = "0.1.0"

__all__ = [
    "Explicit", "FiniteEmbedded", "FrequencyState", "FrequencyVector", "Geometric", "GeometricCross",
    "PhaseState", "PowerLaw", "ProductSummable", "Sender", "UniformFinite",
]
