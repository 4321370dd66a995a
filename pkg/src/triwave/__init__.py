"""Semiclassical soliton ensembles for the three-wave resonant interaction equations."""

from .model import (
    FieldGrid,
    LaxCoefficients,
    ModelParams,
    Packet,
    ResidualReport,
    manley_rowe_invariants,
    packet_mass,
    residual_norm,
)

__version__ = "0.1.0"

__all__ = [
    "FieldGrid",
    "LaxCoefficients",
    "ModelParams",
    "Packet",
    "ResidualReport",
    "manley_rowe_invariants",
    "packet_mass",
    "residual_norm",
    "__version__",
]
