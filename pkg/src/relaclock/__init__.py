"""Relational-time simulation with an engineered clock register."""
from .clock import ClockSpec
from .errors import (ConfigError, DimensionError, NotPositiveDefiniteError, NumericalError, RelaclockError,
                     StateFileError, VanishingNormError)

__version__ = "0.1.0"

__all__ = ["ClockSpec", "ConfigError", "DimensionError", "NotPositiveDefiniteError", "NumericalError",
           "RelaclockError", "StateFileError", "VanishingNormError", "__version__"]
