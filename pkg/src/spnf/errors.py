"""Exceptions shared across the package."""


class BudgetError(RuntimeError):
    """An enumeration or construction would exceed its configured resource budget."""


class ResonanceCrossingError(RuntimeError):
    """A rational flow left the non-resonant domain it was started in."""

    def __init__(self, message, t=None, omega_min=None):
        super().__init__(message)
        self.t = t
        self.omega_min = omega_min


class ZeroDenominatorError(ZeroDivisionError):
    """A modulated-frequency denominator vanishes exactly at the evaluation state."""

    def __init__(self, message, denominator=None):
        super().__init__(message)
        self.denominator = denominator
