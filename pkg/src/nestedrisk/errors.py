"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid parameters, distributions or configuration."""


class SolverError(RuntimeError):
    """A numerical method failed to converge or produced non-finite values."""
