# tools/errors.py
"""
Exception types shared by the tools and agents packages.

Library code raises these; the CLI maps them to exit codes and the sweep agent
turns them into flagged records instead of dropping a case.
"""

from __future__ import annotations

from typing import Optional, Tuple


class PhaseFieldError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(PhaseFieldError, ValueError):
    """A parameter violates the invariants of the type that owns it."""


class PotentialDomainError(PhaseFieldError, ValueError):
    """An order-parameter value lies outside the domain of the exact potential."""


class ConstructionError(PhaseFieldError, ValueError):
    """The modified potential cannot be built for the requested constant."""


class ConvergenceError(PhaseFieldError, RuntimeError):
    """An iterative method stopped without meeting its tolerance."""

    def __init__(self, message: str, bracket: Optional[Tuple[float, float]] = None, iterations: int = 0):
        super().__init__(message)
        self.bracket = bracket
        self.iterations = iterations


class StabilityError(PhaseFieldError, ValueError):
    """The explicit time step exceeds the forward Euler stability bound."""

    def __init__(self, message: str, dt_max: float):
        super().__init__(message)
        self.dt_max = dt_max


class InstabilityError(PhaseFieldError, RuntimeError):
    """The integration produced a non-finite value or left [-1, 1]."""

    def __init__(self, message: str, step: int = -1, node: Optional[Tuple[int, int]] = None):
        super().__init__(message)
        self.step = step
        self.node = node


class NoStraddleError(PhaseFieldError, ValueError):
    """Both ends of a threshold bracket classify the same way."""


class FieldFormatError(PhaseFieldError, ValueError):
    """A field file is missing, truncated or inconsistent with its sidecar."""
