"""Exception hierarchy shared by the services and the command layer"""
from typing import Any, List, Optional


class SensorNetError(Exception):
    """Base class for simulator errors"""


class ConfigurationError(SensorNetError, ValueError):
    """Inconsistent dimensions or an invalid experiment configuration"""


class InvalidConfigError(ConfigurationError):
    """Experiment config failed validation; carries every violation found"""

    def __init__(self, violations: List[Any]):
        self.violations = list(violations)
        listing = "; ".join(str(v) for v in self.violations)
        super().__init__(f"Invalid experiment config ({len(self.violations)} violation(s)): {listing}")


class DomainError(SensorNetError, ValueError):
    """Argument outside the domain of an operation"""


class PreconditionViolation(SensorNetError, ValueError):
    """Caller broke a documented precondition"""


class AllocationError(SensorNetError, RuntimeError):
    """Water-level search failed to converge"""


class NonFiniteResultError(SensorNetError, ValueError):
    """A sweep point produced NaN or inf"""

    def __init__(self, grid_value: float, column: Optional[str] = None):
        self.grid_value = grid_value
        self.column = column
        where = f" in column '{column}'" if column else ""
        super().__init__(f"Nonfinite result at grid point {grid_value}{where}")
