"""
Engine exceptions.

Each carries a human message and a machine-readable code, mirroring the
(message, code) pair used across the package.
"""

from typing import Optional


class EngineError(Exception):
    """Base class for solver failures."""

    def __init__(self, message: str, code: str = "engine_error"):
        """
        Initialize engine error.

        Args:
            message: Human-readable error message
            code: Machine-readable error code
        """
        super().__init__(message)
        self.message = message
        self.code = code


class SettingsError(EngineError):
    """Raised when solver settings violate their invariants."""

    def __init__(self, message: str, field: str = ""):
        super().__init__(message, "invalid_settings")
        self.field = field


class SingularSystemError(EngineError):
    """Raised when the Newton matrix is singular or too ill-conditioned to trust."""

    def __init__(self, message: str, variable: str = "", condition: float = float("inf")):
        """
        Args:
            message: Human-readable error message
            variable: Label of the worst-pivot variable
            condition: Condition estimate of the factorization
        """
        super().__init__(message, "singular_system")
        self.variable = variable
        self.condition = condition


class NonInteriorIterateError(EngineError):
    """Raised when an L1 iterate has a non-positive current or inequality dual."""

    def __init__(self, message: str, variable: str = ""):
        super().__init__(message, "non_interior")
        self.variable = variable


class MaxIterationsError(EngineError):
    """
    Raised when Newton's method exhausts its iteration budget.

    The partial result (best residual reached, last iterate) rides along so
    callers can still report it.
    """

    def __init__(self, message: str, best_residual: float, result: Optional[object] = None):
        super().__init__(message, "max_iterations")
        self.best_residual = best_residual
        self.result = result
