"""
ddinfer - Exception Hierarchy

All library modules raise subclasses of DataDrivenError so that the command
line front end can report them uniformly and exit with a nonzero status.

Exceptions:
    DataDrivenError: Base exception for all ddinfer errors
    DimensionError: Array shapes of states, metrics or operators disagree
    MetricError: Metric weights or moduli are not positive definite
    GeometryError: Invalid truss geometry (zero-length bars, bad references)
    MechanismError: Assembled structure is kinematically unstable
    DataSetError: Invalid or unreadable material data set
    ConvergenceError: Iterative procedure stopped without converging
    InadmissibleStateError: State violates compatibility or equilibrium
    ConfigError: Invalid run configuration
"""

from typing import Any, Optional


class DataDrivenError(Exception):
    """Base exception for data-driven inference errors."""
    pass


class DimensionError(DataDrivenError):
    """Raised when array dimensions of states, metrics or operators disagree."""
    pass


class MetricError(DataDrivenError):
    """Raised when metric weights are not positive or a modulus is not SPD."""
    pass


class GeometryError(DataDrivenError):
    """Raised when a truss geometry is invalid."""
    pass


class MechanismError(GeometryError):
    """Raised when the discrete gradient is rank deficient (rank(B) < n)."""

    def __init__(self, message: str, rank: int, n_dofs: int):
        super().__init__(message)
        self.rank = rank
        self.n_dofs = n_dofs


class DataSetError(DataDrivenError):
    """Raised when a material data set is invalid or cannot be parsed."""
    pass


class ConvergenceError(DataDrivenError):
    """Raised when an iteration stops without converging.

    The last iterate is kept so callers can still inspect or use it.
    """

    def __init__(self, message: str, last_iterate: Optional[Any] = None, iterations: int = 0):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.iterations = iterations


class InadmissibleStateError(DataDrivenError):
    """Raised when a state is not in the constraint set."""
    pass


class ConfigError(DataDrivenError):
    """Raised when a run configuration is invalid."""
    pass
