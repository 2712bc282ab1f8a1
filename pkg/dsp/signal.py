"""
Spectral Signal Mathematics
Waveform container, STFT amplitude and the multiscale spectral distance
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.signal import get_window

from core.exceptions import ConfigurationError, DataError, ShapeError

logger = logging.getLogger(__name__)

# Reference sample rate the default scale set is written for
REFERENCE_RATE = 48000
DEFAULT_SCALES = (2048, 1024, 512, 256, 128)


@dataclass(frozen=True)
class Waveform:
    """Mono audio with its sample rate"""
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim != 1:
            raise ShapeError(f"Waveform must be mono 1-D, got shape {samples.shape}")
        if int(self.sample_rate) <= 0:
            raise ConfigurationError(f"Sample rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise DataError("Waveform contains NaN or Inf samples")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


class SpectralConfig(BaseModel):
    """Scales, log floor and taper of the multiscale spectral distance"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    scales: Tuple[int, ...] = DEFAULT_SCALES
    epsilon: float = Field(default=1e-7, gt=0.0)
    window: str = "hann"

    @field_validator("scales")
    @classmethod
    def _check_scales(cls, scales: Tuple[int, ...]) -> Tuple[int, ...]:
        if not scales:
            raise ValueError("at least one scale is required")
        for n in scales:
            if not is_power_of_two(n) or n < 32:
                raise ValueError(f"scale {n} must be a power of two >= 32")
        return tuple(scales)

    @classmethod
    def for_sample_rate(cls, sample_rate: int, **kwargs) -> "SpectralConfig":
        """Default scale set shrunk by the nearest power of two for low rates"""
        ratio = REFERENCE_RATE / float(sample_rate)
        factor = 2 ** max(0, int(round(math.log2(ratio)))) if ratio > 1 else 1
        scales = tuple(max(32, n // factor) for n in DEFAULT_SCALES)
        return cls(scales=tuple(dict.fromkeys(scales)), **kwargs)


@dataclass(frozen=True)
class AmplitudeSpectrogram:
    """|STFT| as a [frames x bins] matrix"""
    magnitudes: np.ndarray
    scale: int

    @property
    def frames(self) -> int:
        return int(self.magnitudes.shape[0])

    @property
    def bins(self) -> int:
        return int(self.magnitudes.shape[1])


def _samples(x: Union[Waveform, np.ndarray]) -> np.ndarray:
    if isinstance(x, Waveform):
        return x.samples
    return np.asarray(x)


def frame_count(length: int, n: int) -> int:
    """Frames covering every sample with hop n/4 and a zero-padded tail"""
    hop = n // 4
    if length <= n:
        return 1
    return -(-(length - n) // hop) + 1


def analysis_window(name: str, n: int) -> np.ndarray:
    if name in ("rect", "rectangular", "boxcar"):
        name = "boxcar"
    return get_window(name, n, fftbins=True)


def frame_signal(samples: np.ndarray, n: int) -> np.ndarray:
    """Frames of the last axis, tail zero-padded; returns [..., frames, n]"""
    hop = n // 4
    length = samples.shape[-1]
    frames = frame_count(length, n)
    padded_length = (frames - 1) * hop + n
    pad = [(0, 0)] * (samples.ndim - 1) + [(0, padded_length - length)]
    padded = np.pad(samples, pad)
    return sliding_window_view(padded, n, axis=-1)[..., ::hop, :]


def stft_amplitude(x: Union[Waveform, np.ndarray], n: int, window: str = "hann") -> AmplitudeSpectrogram:
    """Modulus of the DFT of tapered frames, window n and hop n/4"""
    if not is_power_of_two(n) or n < 4:
        raise ConfigurationError(f"STFT window size must be a power of two, got {n}")
    samples = _samples(x).astype(np.float64, copy=False)
    if samples.ndim != 1:
        raise ShapeError(f"stft_amplitude expects mono input, got shape {samples.shape}")
    frames = frame_signal(samples, n) * analysis_window(window, n)
    return AmplitudeSpectrogram(np.abs(np.fft.rfft(frames, axis=-1)), n)


def spectral_terms(
    x: Union[Waveform, np.ndarray],
    y: Union[Waveform, np.ndarray],
    cfg: SpectralConfig
) -> List[Tuple[int, float, float]]:
    """Per-scale (scale, relative Frobenius term, log-L1 term)"""
    if isinstance(x, Waveform) and isinstance(y, Waveform) and x.sample_rate != y.sample_rate:
        raise ShapeError("Sample rates differ", expected=x.sample_rate, actual=y.sample_rate)
    xs, ys = _samples(x), _samples(y)
    if xs.shape != ys.shape:
        raise ShapeError("Signals must have equal lengths", expected=xs.shape, actual=ys.shape)

    terms = []
    for n in cfg.scales:
        sx = stft_amplitude(xs, n, cfg.window).magnitudes
        sy = stft_amplitude(ys, n, cfg.window).magnitudes
        diff = sx - sy
        frobenius = float(np.linalg.norm(diff) / (np.linalg.norm(sx) + cfg.epsilon))
        log_l1 = float(np.log(np.abs(diff).sum() + cfg.epsilon))
        terms.append((n, frobenius, log_l1))
    return terms


def spectral_distance(
    x: Union[Waveform, np.ndarray],
    y: Union[Waveform, np.ndarray],
    cfg: SpectralConfig
) -> float:
    """Multiscale spectral distance between a reference x and a candidate y"""
    return float(sum(frob + log_l1 for _, frob, log_l1 in spectral_terms(x, y, cfg)))


def spectral_floor(cfg: SpectralConfig) -> float:
    """Value of the distance for identical inputs"""
    return len(cfg.scales) * math.log(cfg.epsilon)
