"""Pseudo-spectral stability laboratory for perturbed 3D Couette flow."""

from .domain import DomainConfig, FrequencyTriple, SpectralGrid, SpectralGrid2D
from .multipliers import MultiplierParams

__all__ = [
    "DomainConfig",
    "FrequencyTriple",
    "SpectralGrid",
    "SpectralGrid2D",
    "MultiplierParams",
]

__version__ = "0.1.0"
