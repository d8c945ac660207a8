"""
Custom exceptions for the library.
"""
from typing import Optional, Tuple


class BaseApplicationError(Exception):
    """Base class for library-specific exceptions."""
    pass


class EvidenceDomainError(BaseApplicationError):
    """
    Raised when a belief-algebra argument lies outside its domain.

    Attributes:
        value (float): The offending value
        message (str): Detailed error message
    """
    def __init__(self, value: float, message: Optional[str] = None):
        self.value = value
        self.message = message or f"Value {value!r} is outside the admissible domain"
        super().__init__(self.message)


class SaturationError(BaseApplicationError):
    """
    Raised when Dempster combination meets (near-)total conflict.

    Attributes:
        k (float): The conflict factor that triggered saturation
        message (str): Detailed error message
    """
    def __init__(self, k: float, message: Optional[str] = None):
        self.k = k
        self.message = message or f"Dempster combination saturated at k={k!r}"
        super().__init__(self.message)


class SensorModelError(BaseApplicationError):
    """
    Raised when a sensor model is evaluated outside its footprint.

    Attributes:
        message (str): Detailed error message
    """
    def __init__(self, message: str):
        self.message = message
        super().__init__(self.message)


class ConfigError(BaseApplicationError):
    """
    Raised when parameters do not fit together (e.g. wrong sensor kind for a grid).

    Attributes:
        message (str): Detailed error message
    """
    def __init__(self, message: str):
        self.message = message
        super().__init__(self.message)


class GridDimensionError(BaseApplicationError):
    """
    Raised when two grids that must align have different shapes.

    Attributes:
        expected (tuple): Shape of the reference grid
        actual (tuple): Shape of the other grid
        message (str): Detailed error message
    """
    def __init__(
        self,
        expected: Tuple[int, ...],
        actual: Tuple[int, ...],
        message: Optional[str] = None,
    ):
        self.expected = expected
        self.actual = actual
        self.message = message or f"Grid shape {actual} does not match {expected}"
        super().__init__(self.message)


class ScanError(BaseApplicationError):
    """
    Raised when a scan is malformed.

    Attributes:
        message (str): Detailed error message
    """
    def __init__(self, message: str):
        self.message = message
        super().__init__(self.message)


class SimulationError(BaseApplicationError):
    """
    Raised when the simulated world cannot produce the requested data.

    Attributes:
        message (str): Detailed error message
    """
    def __init__(self, message: str):
        self.message = message
        super().__init__(self.message)


class UndefinedStatisticError(BaseApplicationError):
    """
    Raised when a statistic is undefined for its inputs.

    Attributes:
        statistic (str): Name of the statistic
        reason (str): Why it is undefined
        message (str): Detailed error message
    """
    def __init__(self, statistic: str, reason: str, message: Optional[str] = None):
        self.statistic = statistic
        self.reason = reason
        self.message = message or f"{statistic} is undefined: {reason}"
        super().__init__(self.message)


class ExperimentMismatchError(BaseApplicationError):
    """
    Raised when a run log does not belong to the experiment config replaying it.

    Attributes:
        message (str): Detailed error message
    """
    def __init__(self, message: str):
        self.message = message
        super().__init__(self.message)


class OutputError(BaseApplicationError):
    """
    Raised when results cannot be written.

    Attributes:
        path (str): Output location
        message (str): Detailed error message
    """
    def __init__(self, path: str, message: Optional[str] = None):
        self.path = path
        self.message = message or f"Cannot write output to {path}"
        super().__init__(self.message)
