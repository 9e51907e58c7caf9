"""Shared exception types."""

__all__ = [
    "PositivityError",
    "FineGridViolation",
    "GainRecoveryFailure",
    "SystemFormatError",
]


class PositivityError(ValueError):
    """A certificate routine was handed a system that is not state positive."""


class FineGridViolation(RuntimeError):
    """A coarsely sampled certificate failed its fine-grid re-verification.

    Signals insufficient sampling; callers should raise the sample count.
    """


class GainRecoveryFailure(RuntimeError):
    """A diagonal entry of X(tau) is too close to zero to invert."""


class SystemFormatError(ValueError):
    """Malformed on-disk system description."""
