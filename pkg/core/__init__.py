"""
Realtime Audio VAE - Core Module
Shared exceptions, precision policy and seeded random streams
"""

from .exceptions import (
    RaveError, ConfigurationError, ShapeError, DataError, DesignError,
    NumericError, StatisticsError, CheckpointError, StreamError
)
from .precision import default_dtype, set_default_dtype, float64_mode
from .seeding import derive_rng

__all__ = [
    'RaveError',
    'ConfigurationError',
    'ShapeError',
    'DataError',
    'DesignError',
    'NumericError',
    'StatisticsError',
    'CheckpointError',
    'StreamError',
    'default_dtype',
    'set_default_dtype',
    'float64_mode',
    'derive_rng'
]
