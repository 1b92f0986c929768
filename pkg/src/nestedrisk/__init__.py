"""Option pricing and portfolio choice under nested coherent risk measures."""

from .errors import SolverError, ValidationError

__all__ = ["SolverError", "ValidationError"]
