"""
Framework Exceptions
Custom exceptions for signal processing, training and file handling
"""

from typing import Any, Dict, Optional


class RaveError(Exception):
    """Base exception for all library errors"""
    error_code = "rave_error"

    def __init__(self, message: str, error_code: Optional[str] = None):
        if error_code is not None:
            self.error_code = error_code
        super().__init__(message)


class ConfigurationError(RaveError):
    """Raised when a configuration value or key is invalid"""
    error_code = "configuration"

    def __init__(self, message: str, keys: Optional[list] = None, error_code: Optional[str] = None):
        self.keys = list(keys or [])
        super().__init__(message, error_code)


class ShapeError(RaveError):
    """Raised when array shapes, lengths or channel counts do not match"""
    error_code = "shape"

    def __init__(self, message: str, expected: Any = None, actual: Any = None, error_code: Optional[str] = None):
        self.expected = expected
        self.actual = actual
        super().__init__(message, error_code)


class DataError(RaveError):
    """Raised when input data is missing, empty or malformed"""
    error_code = "data"

    def __init__(self, message: str, path: Optional[str] = None, error_code: Optional[str] = None):
        self.path = path
        super().__init__(message, error_code)


class DesignError(RaveError):
    """Raised when filter design does not reach its quality floor"""
    error_code = "design"

    def __init__(self, message: str, diagnostics: Optional[Dict[str, float]] = None, error_code: Optional[str] = None):
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message, error_code)


class NumericError(RaveError):
    """Raised on NaN/Inf values or failed numerical routines"""
    error_code = "numeric"

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None, error_code: Optional[str] = None):
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message, error_code)


class StatisticsError(NumericError):
    """Raised when batch statistics cannot be computed"""
    error_code = "statistics"


class CheckpointError(RaveError):
    """Raised when a checkpoint or latent archive cannot be read or written"""
    error_code = "checkpoint"

    def __init__(self, message: str, path: Optional[str] = None, error_code: Optional[str] = None):
        self.path = path
        super().__init__(message, error_code)


class StreamError(RaveError):
    """Raised when a stream state does not belong to the model it is used with"""
    error_code = "stream"
