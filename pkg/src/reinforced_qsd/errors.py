"""Exception types raised across the package."""


class ReinforcedQSDError(Exception):
    """Base class for all package errors."""


class ParameterError(ReinforcedQSDError, ValueError):
    pass


class ModelEvaluationError(ReinforcedQSDError, FloatingPointError):
    """Drift or diffusion coefficient returned a non-finite value."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class RunawayPathError(ReinforcedQSDError, RuntimeError):
    """A path exceeded its step budget without being absorbed."""


class EmptyMeasureError(ReinforcedQSDError, ValueError):
    pass


class ChainError(ReinforcedQSDError, ValueError):
    """Invalid absorbing chain (sign pattern, no absorption, reducibility)."""


class NumericalError(ReinforcedQSDError, ArithmeticError):
    pass


class HorizonError(ReinforcedQSDError, ValueError):
    """Requested time lies beyond what can be represented or what the data covers."""


class ConfigError(ReinforcedQSDError, ValueError):
    """Config parse failure; carries the offending key path and line when known."""

    def __init__(self, message, key=None, line=None):
        where = ""
        if key is not None:
            where += f" [key {key!r}"
            where += f", line {line}]" if line is not None else "]"
        super().__init__(message + where)
        self.key = key
        self.line = line
