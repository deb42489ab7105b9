"""Exception types shared across the package."""


class PSRError(Exception):
    """Base class for all library errors."""


class DomainError(PSRError, ValueError):
    """An argument lies outside the domain of the requested operation."""


class ConvergenceError(PSRError, RuntimeError):
    """Fixed-point iteration failed to reach the requested tolerance."""

    def __init__(self, message, residuals=()):
        super().__init__(message)
        self.residuals = list(residuals)

    @property
    def residual(self):
        return self.residuals[-1] if self.residuals else float("nan")


class TruncationError(PSRError, RuntimeError):
    """An unbounded domain could not be truncated within the tail budget."""
