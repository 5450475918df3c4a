"""Exception hierarchy shared across the package."""

from __future__ import annotations


class ThermorunError(Exception):
    """Base class for all package-specific failures."""


class ValidationError(ThermorunError, ValueError):
    """A value violates a declared invariant. Names the offending field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class DomainError(ThermorunError, ValueError):
    """Evaluation requested outside the mathematical domain (e.g. u <= 0)."""


class ConvergenceError(ThermorunError, RuntimeError):
    """An iterative solver failed. Carries the last iterate and residual."""

    def __init__(self, message: str, last_iterate=None, residual: float | None = None):
        self.last_iterate = last_iterate
        self.residual = residual
        if residual is not None:
            message = f"{message} (last residual {residual:.3e})"
        super().__init__(message)


class IntegrationFailure(ThermorunError, RuntimeError):
    """Time integration broke down (step-size underflow / stiffness failure).

    Holds the last valid state and the partial trajectory up to the failure.
    """

    def __init__(self, message: str, last_state=None, partial=None):
        self.last_state = last_state
        self.partial = partial
        super().__init__(message)


class CalibrationError(ThermorunError, RuntimeError):
    """Rate-prefactor calibration found no admissible solution."""


class NotAHopfError(ThermorunError, ValueError):
    """A point billed as a Hopf bifurcation fails the Hopf conditions."""


class GermError(ThermorunError, ValueError):
    """A periodic-orbit seed is too degenerate to correct."""
