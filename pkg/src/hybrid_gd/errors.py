"""Exception hierarchy shared across the package."""

from __future__ import annotations


class HybridGDError(Exception):
    """Base class for all package errors."""


class DimensionError(HybridGDError, ValueError):
    pass


class InvalidSpectrumError(HybridGDError, ValueError):
    pass


class ConfigError(HybridGDError, ValueError):
    """Invalid experiment, timer or partition configuration."""


class BoundViolationError(ConfigError):
    """tau_max does not satisfy the dwell-time bound tau_max < beta^2 / (3 K^3)."""


class FlowPastJumpError(HybridGDError):
    """Requested flow would carry the timer below zero."""


class NotInJumpSetError(HybridGDError):
    """Jump requested while the timer is nonzero."""


class NumericalFailure(HybridGDError, ArithmeticError):
    def __init__(self, message: str, t: float, j: int):
        super().__init__(f"{message} at hybrid time (t={t!r}, j={j})")
        self.t = t
        self.j = j


class InapplicableHypothesis(HybridGDError):
    """A check was requested on a trajectory that does not meet its hypothesis.

    This is not a check failure: the inequality simply makes no claim there.
    """
