"""Exception types raised across the lab."""

from typing import Any, Optional


class LabError(Exception):
    """Base class for every error the lab raises on purpose."""


class ConfigError(LabError, ValueError):
    """Invalid configuration, mismatched dimensions, or bad CLI usage."""


class DomainError(LabError, ValueError):
    """Argument outside the domain of a formula (e.g. s <= -1/4, theta = 0)."""


class SpecMismatchError(LabError, ValueError):
    """Operation called with an EquationSpec it is not defined for."""


class IntegrityError(LabError, RuntimeError):
    """A spectrum lost the Hermitian symmetry of a real field."""


class NumericError(LabError, ArithmeticError):
    """Non-finite value produced by a multiplier or a reduction."""


class RangeGuardError(LabError, OverflowError):
    """exp(sigma*|gamma|_1) would exceed the overflow guard."""


class MemoryGuardError(LabError, MemoryError):
    """A space-time lattice would exceed the configured size limit."""


class BlowUpError(LabError, RuntimeError):
    """NaN/Inf appeared while stepping; carries the last good state."""

    def __init__(
        self,
        message: str,
        time_tag: float,
        last_good: Optional[Any] = None,
        trajectory: Optional[Any] = None,
    ):
        super().__init__(message)
        self.time_tag = time_tag
        self.last_good = last_good
        self.trajectory = trajectory
