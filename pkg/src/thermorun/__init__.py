"""Stability and bifurcation analysis of exothermic flow-reactor models."""

from .errors import (
    CalibrationError,
    ConvergenceError,
    DomainError,
    GermError,
    IntegrationFailure,
    NotAHopfError,
    ThermorunError,
    ValidationError,
)
from .model import (
    DimensionalParams,
    ModelParams,
    Preset,
    RateDiagram,
    State,
    calibrate_sigma,
    dimensionalize,
    jacobian,
    nondimensionalize,
    preset,
    rate_crossings,
    rate_diagram,
    reduced_balance,
    vector_field,
)

__version__ = "0.1.0"

__all__ = [
    "CalibrationError", "ConvergenceError", "DomainError", "GermError",
    "IntegrationFailure", "NotAHopfError", "ThermorunError", "ValidationError",
    "DimensionalParams", "ModelParams", "Preset", "RateDiagram", "State",
    "calibrate_sigma", "dimensionalize", "jacobian", "nondimensionalize",
    "preset", "rate_crossings", "rate_diagram", "reduced_balance",
    "vector_field", "__version__",
]
