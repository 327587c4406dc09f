"""Exception hierarchy shared by all relaclock modules."""


class RelaclockError(Exception):
    """Base class for all library errors."""


class DimensionError(RelaclockError, ValueError):
    """Operand shapes are incompatible or exceed the configured cap."""


class NotPositiveDefiniteError(RelaclockError, ArithmeticError):
    """Cholesky factorization failed on a matrix expected to be positive definite."""


class NonFiniteError(RelaclockError, ArithmeticError):
    """A NaN or infinity showed up where only finite values are allowed."""


class NumericalError(RelaclockError, ArithmeticError):
    """A numerical tolerance check failed (norm drift, negative variance, ...)."""


class VanishingNormError(NumericalError):
    """A conditional state was requested where the clock weight is (numerically) zero."""


class ConfigError(RelaclockError, ValueError):
    """Scenario configuration is invalid; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class StateFileError(RelaclockError, ValueError):
    """A serialized state file is truncated or has a bad header."""
