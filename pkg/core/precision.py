"""
Numeric Precision Policy
Process-wide float dtype used by tensors and layers
"""

from contextlib import contextmanager
from typing import Iterator

import numpy as np

_DEFAULT_DTYPE = np.float32


def default_dtype() -> type:
    """Current float dtype for new tensors and parameters"""
    return _DEFAULT_DTYPE


def set_default_dtype(dtype) -> None:
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype).type
    if dtype not in (np.float32, np.float64):
        raise ValueError(f"Unsupported dtype: {dtype}")
    _DEFAULT_DTYPE = dtype


@contextmanager
def float64_mode() -> Iterator[None]:
    """Verification mode: everything created inside runs in float64"""
    previous = _DEFAULT_DTYPE
    set_default_dtype(np.float64)
    try:
        yield
    finally:
        set_default_dtype(previous)
