"""Exception types shared across the package.

Validation and domain errors signal bad inputs (CLI exit code 1);
solver and conditioning errors signal numerical failure (exit code 2).
"""


class ValidationError(ValueError):
    """An argument or configuration value is out of range or malformed."""


class DomainError(ValueError):
    """An input leaves the mathematical domain of an operation (e.g. log of 0)."""


class SolverError(RuntimeError):
    """An iterative solver failed to reach its tolerance."""


class ConditioningError(SolverError):
    """A pointwise linear system is too ill-conditioned to invert reliably."""
