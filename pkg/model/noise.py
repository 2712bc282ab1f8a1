"""
Filtered Noise Synthesizer
Per-frame FIR filters from band amplitudes, applied to white noise and overlap-added
"""

import logging
from typing import List, Optional

import numpy as np
from scipy.signal import get_window

from autograd import functional as F
from autograd.nn import Conv1d, LEAKY_SLOPE, Module
from autograd.tensor import Tensor
from .config import ModelConfig

logger = logging.getLogger(__name__)

# Sigmoid offset: amplitudes start near zero
AMPLITUDE_OFFSET = 5.0


def noise_filter_matrix(noise_bands: int) -> np.ndarray:
    """[bands x (2 bands + 1)] map from amplitude responses to Hann-windowed linear-phase FIRs

    Amplitude i drives DFT bin i + 1 of a 2*bands-point zero-phase response; the
    DC bin stays at zero.
    """
    size = 2 * noise_bands
    taps = size + 1
    window = get_window("hann", taps, fftbins=False)
    shift = (np.arange(taps) - noise_bands) % size
    matrix = np.zeros((noise_bands, taps))
    for i in range(noise_bands):
        spectrum = np.zeros(noise_bands + 1)
        spectrum[i + 1] = 1.0
        matrix[i] = np.fft.irfft(spectrum, n=size)[shift] * window
    return matrix


def draw_noise(rng: np.random.Generator, batch: int, bands: int, frames: int, frame: int, dtype) -> np.ndarray:
    """Uniform white noise [B x M x frames x frame], drawn frame-major so split draws concatenate"""
    noise = rng.uniform(-1.0, 1.0, size=(frames, batch, bands, frame))
    return noise.transpose(1, 2, 0, 3).astype(dtype, copy=False)


def noise_synth(
    amplitudes: Tensor,
    frame: int,
    rng: np.random.Generator,
    matrix: Optional[np.ndarray] = None,
    stream=None,
    owner=None
) -> Tensor:
    """Amplitudes [B x M x frames x noise_bands] to multiband noise [B x M x frames * frame]

    Filter tails past the block are dropped offline; a stream carries them
    into the next block.
    """
    batch, bands, frames, noise_bands = amplitudes.shape
    if matrix is None:
        matrix = noise_filter_matrix(noise_bands)
    filters = F.matmul(amplitudes, matrix)
    noise = draw_noise(rng, batch, bands, frames, frame, amplitudes.dtype)
    full = F.overlap_add(F.frame_convolve(filters, noise), frame)
    keep = frames * frame
    if stream is not None:
        return stream.overlap(owner, full, keep)
    return F.crop(full, 0, keep)


def _factorize(frame: int) -> List[int]:
    factors = []
    while frame > 1:
        step = 4 if frame % 4 == 0 else 2
        factors.append(step)
        frame //= step
    return factors


class NoiseHead(Module):
    """Downsamples decoder features to the noise frame rate and emits band amplitudes"""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        super().__init__()
        width = cfg.decoder_capacity
        self.bands = cfg.bands
        self.noise_bands = cfg.noise_bands
        self.frame = cfg.noise_frame
        self.downsample = [
            Conv1d(width, width, 2 * factor + 1, rng, stride=factor)
            for factor in _factorize(cfg.noise_frame)
        ]
        self.proj = Conv1d(width, cfg.bands * cfg.noise_bands, 3, rng)
        self._matrix = noise_filter_matrix(cfg.noise_bands)

    @property
    def overlap_taps(self) -> int:
        return self._matrix.shape[1] - 1

    def amplitudes(self, h: Tensor, stream=None) -> Tensor:
        for conv in self.downsample:
            h = conv(F.leaky_relu(h, LEAKY_SLOPE), stream=stream)
        logits = self.proj(F.leaky_relu(h, LEAKY_SLOPE), stream=stream)
        batch, _, frames = logits.shape
        amps = F.sigmoid(logits - AMPLITUDE_OFFSET)
        amps = F.reshape(amps, (batch, self.bands, self.noise_bands, frames))
        return F.transpose(amps, (0, 1, 3, 2))

    def forward(self, h: Tensor, rng: np.random.Generator, stream=None) -> Tensor:
        return noise_synth(self.amplitudes(h, stream), self.frame, rng, self._matrix, stream, self)
