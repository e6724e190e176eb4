"""Exception hierarchy shared by every rmm_lab module."""

from __future__ import annotations


class RmmError(Exception):
    """Base class for all library errors."""


class DomainError(RmmError, ValueError):
    """An argument lies outside the domain of the operation."""


class NumericError(RmmError, ArithmeticError):
    """A function evaluation produced a non-finite value."""

    def __init__(self, message: str, x: float | None = None):
        super().__init__(message)
        self.x = x


class ExpiryError(RmmError):
    """The operation is undefined at (or past) the pool's expiry."""


class LiquidityBoundError(RmmError):
    """A trade would push reserves outside the representable band."""


class InfeasibleBudgetError(RmmError):
    """A composition has a non-positive cost denominator."""


class CoincidenceOfWantsError(RmmError):
    """A binary short was requested without its paired counter-short."""


class DegenerateOptionError(RmmError):
    """An option used for hedging has non-positive value."""


class HedgeInsufficientError(RmmError):
    """A hedge plan holds fewer options than an exercise requires."""


class PathMismatchError(RmmError):
    """A price path does not span the pool's lifetime."""


class ConfigError(RmmError, ValueError):
    """Invalid scenario configuration."""
