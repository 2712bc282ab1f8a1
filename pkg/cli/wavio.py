"""
WAV Input/Output
Mono PCM16 and float32 RIFF files, no resampling and no downmixing
"""

import logging
from pathlib import Path
from typing import Union

import numpy as np
from scipy.io import wavfile

from core.exceptions import DataError
from dsp.signal import Waveform

logger = logging.getLogger(__name__)

FORMATS = ("pcm16", "float32")
PCM16_SCALE = 32768.0

PathLike = Union[str, Path]


def read_wav(path: PathLike) -> Waveform:
    """Mono PCM16 or float32 file as float samples in [-1, 1]"""
    path = Path(path)
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError as e:
        raise DataError(f"WAV file not found: {path}", path=str(path)) from e
    except (ValueError, OSError) as e:
        raise DataError(f"Unreadable WAV file {path}: {e}", path=str(path)) from e

    if data.ndim != 1:
        raise DataError(f"{path} has {data.shape[1]} channels; only mono files are accepted", path=str(path))
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / PCM16_SCALE
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise DataError(f"{path} uses unsupported sample format {data.dtype}; expected PCM16 or float32", path=str(path))
    logger.debug(f"Read {samples.size} samples at {rate} Hz from {path}")
    return Waveform(samples, int(rate))


def quantize_pcm16(samples: np.ndarray) -> np.ndarray:
    scaled = np.round(np.asarray(samples, dtype=np.float64) * PCM16_SCALE)
    return np.clip(scaled, -PCM16_SCALE, PCM16_SCALE - 1).astype(np.int16)


def write_wav(path: PathLike, waveform: Waveform, fmt: str = "pcm16") -> Path:
    if fmt not in FORMATS:
        raise DataError(f"Unknown WAV format '{fmt}', expected one of {FORMATS}")
    path = Path(path)
    if fmt == "pcm16":
        data = quantize_pcm16(waveform.samples)
    else:
        data = np.asarray(waveform.samples, dtype=np.float32)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        wavfile.write(path, waveform.sample_rate, data)
    except OSError as e:
        raise DataError(f"Cannot write WAV file {path}: {e}", path=str(path)) from e
    return path
