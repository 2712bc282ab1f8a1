"""
Data Augmentation
Dequantization, random allpass filtering and random cropping of waveforms
"""

from typing import Optional, Sequence

import numpy as np
from scipy.signal import lfilter

from core.exceptions import ConfigurationError, DataError
from .signal import Waveform

ALLPASS_SECTIONS = 4
ALLPASS_LIMIT = 0.9


def dequantize(x: Waveform, bits: int, rng: np.random.Generator) -> Waveform:
    """Add uniform noise of one quantization step q = 2^(1-bits), then clip to [-1, 1]"""
    if not 8 <= int(bits) <= 24:
        raise ConfigurationError(f"Dequantization bits must be in [8, 24], got {bits}")
    q = 2.0 ** (1 - int(bits))
    noise = rng.uniform(-q / 2, q / 2, size=len(x))
    samples = np.clip(x.samples + noise.astype(x.samples.dtype, copy=False), -1.0, 1.0)
    return Waveform(samples, x.sample_rate)


def random_allpass(
    x: Waveform,
    rng: np.random.Generator,
    sections: int = ALLPASS_SECTIONS,
    coefficients: Optional[Sequence[float]] = None
) -> Waveform:
    """Cascade of first-order allpass sections (a + z^-1) / (1 + a z^-1)"""
    if coefficients is None:
        coefficients = rng.uniform(-ALLPASS_LIMIT, ALLPASS_LIMIT, size=sections)
    y = np.asarray(x.samples, dtype=np.float64)
    for a in coefficients:
        y = lfilter([a, 1.0], [1.0, a], y)
    return Waveform(y.astype(x.samples.dtype, copy=False), x.sample_rate)


def random_crop(x: Waveform, length: int, rng: np.random.Generator) -> Waveform:
    """Contiguous slice of exactly `length` samples at a uniform offset"""
    if len(x) < length:
        raise DataError(f"Cannot crop {length} samples from a signal of {len(x)}")
    offset = int(rng.integers(0, len(x) - length + 1))
    return Waveform(x.samples[offset:offset + length], x.sample_rate)
