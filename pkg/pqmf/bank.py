"""
Cosine-Modulated Filter Bank
Analysis into M decimated bands and synthesis back to the full-rate waveform

Both directions are causal and evaluated in polyphase form: analysis takes
one length-L window every M samples, synthesis runs M phase filters of
L/M taps at the band rate and interleaves them. The round trip reproduces
the input delayed by L - 1 samples.
"""

import logging
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Dict, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from core.exceptions import ShapeError
from dsp.signal import Waveform
from .prototype import PrototypeFilter, SearchConfig, design_prototype

logger = logging.getLogger(__name__)

CALIBRATION_SEED = 0
CALIBRATION_MIN_LENGTH = 8192


@dataclass(frozen=True)
class MultibandSignal:
    """M decimated sub-signals of equal length"""
    bands: np.ndarray
    band_rate: float

    def __post_init__(self):
        bands = np.asarray(self.bands)
        if bands.ndim != 2:
            raise ShapeError(f"Multiband signal must be [bands x samples], got shape {bands.shape}")
        object.__setattr__(self, "bands", bands)

    @property
    def band_count(self) -> int:
        return int(self.bands.shape[0])

    @property
    def length(self) -> int:
        return int(self.bands.shape[1])


@dataclass(frozen=True)
class PqmfBank:
    """Analysis filters h_k plus the gains that make the round trip unity"""
    bands: int
    prototype: PrototypeFilter
    filters: np.ndarray
    analysis_gain: float = 1.0
    synthesis_gain: float = 1.0

    @property
    def length(self) -> int:
        return int(self.filters.shape[1])

    @property
    def group_delay(self) -> int:
        """Round-trip delay in samples"""
        return self.length - 1

    @property
    def phase_taps(self) -> int:
        return self.length // self.bands

    @property
    def synthesis_filters(self) -> np.ndarray:
        """Time-reversed analysis filters"""
        return self.filters[:, ::-1]

    @property
    def analysis_kernel(self) -> np.ndarray:
        """[M x 1 x L] correlation kernel for a stride-M convolution over L-1 past samples"""
        return (self.analysis_gain * self.filters[:, ::-1])[:, None, :].copy()

    @property
    def synthesis_kernel(self) -> np.ndarray:
        """[M x M x L/M] phase filters: output phase r from band k"""
        m, taps = self.bands, self.phase_taps
        f = self.synthesis_filters
        kernel = np.empty((m, m, taps))
        for j in range(taps):
            # tap j sees the band sample (taps - 1 - j) frames in the past
            kernel[:, :, j] = f[:, (taps - 1 - j) * m:(taps - j) * m].T
        return self.synthesis_gain * kernel

    def round_trip_snr(self, length: int = CALIBRATION_MIN_LENGTH, seed: int = CALIBRATION_SEED) -> float:
        """White-noise round-trip SNR in dB after delay and gain compensation"""
        length -= length % self.bands
        x = np.random.default_rng(seed).standard_normal(length)
        y = synthesize_array(analyze_array(x, self), self)
        return delayed_snr(x, y, self.group_delay)

    def to_arrays(self, prefix: str = "pqmf") -> Dict[str, np.ndarray]:
        return {
            f"{prefix}.prototype": self.prototype.taps,
            f"{prefix}.params": np.array([
                self.bands, self.prototype.kaiser_beta, self.prototype.cutoff,
                self.analysis_gain, self.synthesis_gain
            ], dtype=np.float64)
        }

    @classmethod
    def from_arrays(cls, arrays: Dict[str, np.ndarray], prefix: str = "pqmf") -> "PqmfBank":
        bands, beta, cutoff, analysis_gain, synthesis_gain = arrays[f"{prefix}.params"].tolist()
        prototype = PrototypeFilter(arrays[f"{prefix}.prototype"], beta, cutoff)
        bank = modulate_bank(prototype, int(bands), calibrate=False)
        return replace(bank, analysis_gain=analysis_gain, synthesis_gain=synthesis_gain)


def delayed_snr(reference: np.ndarray, output: np.ndarray, delay: int) -> float:
    """SNR of output against reference shifted by delay, using the least-squares gain"""
    x = reference[:reference.size - delay]
    y = output[delay:delay + x.size]
    gain = float(np.dot(y, x) / np.dot(x, x))
    error = y - gain * x
    signal_energy = gain * gain * float(np.dot(x, x))
    error_energy = float(np.dot(error, error))
    if error_energy == 0.0:
        return float("inf")
    return 10.0 * np.log10(signal_energy / error_energy)


def modulate_bank(prototype: PrototypeFilter, bands: int, calibrate: bool = True) -> PqmfBank:
    """h_k[n] = 2 p[n] cos((2k + 1) pi/(2M) (n - (L - 1)/2) + (-1)^k pi/4)"""
    taps = prototype.length
    n = np.arange(taps) - (taps - 1) / 2.0
    k = np.arange(bands)[:, None]
    phase = np.where(k % 2 == 0, 1.0, -1.0) * np.pi / 4
    filters = 2.0 * prototype.taps[None, :] * np.cos((2 * k + 1) * (np.pi / (2 * bands)) * n[None, :] + phase)
    bank = PqmfBank(bands=bands, prototype=prototype, filters=filters)
    if not calibrate:
        return bank

    length = max(CALIBRATION_MIN_LENGTH, 16 * taps)
    length -= length % bands
    x = np.random.default_rng(CALIBRATION_SEED).standard_normal(length)
    split = analyze_array(x, bank)
    analysis_gain = float(np.sqrt(np.sum(x * x) / np.sum(split * split)))
    y = synthesize_array(split, bank)
    delay = bank.group_delay
    reference = x[:length - delay]
    round_trip_gain = float(np.dot(y[delay:], reference) / np.dot(reference, reference))
    return replace(bank, analysis_gain=analysis_gain, synthesis_gain=1.0 / (analysis_gain * round_trip_gain))


@lru_cache(maxsize=16)
def build_bank(bands: int, taps: int = 0, search_cfg: SearchConfig = SearchConfig()) -> PqmfBank:
    """Designed and calibrated bank, cached per (bands, taps, search settings)"""
    return modulate_bank(design_prototype(bands, taps, search_cfg), bands)


def _pad_to_multiple(x: np.ndarray, multiple: int) -> np.ndarray:
    remainder = x.shape[-1] % multiple
    if not remainder:
        return x
    width = [(0, 0)] * (x.ndim - 1) + [(0, multiple - remainder)]
    return np.pad(x, width)


def analyze_array(x: np.ndarray, bank: PqmfBank) -> np.ndarray:
    """[..., T] -> [..., M, ceil(T/M)]; the tail is zero-padded to a multiple of M"""
    x = _pad_to_multiple(np.asarray(x), bank.bands)
    width = [(0, 0)] * (x.ndim - 1) + [(bank.length - 1, 0)]
    windows = sliding_window_view(np.pad(x, width), bank.length, axis=-1)[..., ::bank.bands, :]
    kernel = bank.analysis_kernel[:, 0, :].astype(x.dtype, copy=False)
    return np.swapaxes(windows @ kernel.T, -1, -2)


def synthesize_array(y: np.ndarray, bank: PqmfBank) -> np.ndarray:
    """[..., M, Q] -> [..., M * Q]"""
    y = np.asarray(y)
    if y.ndim < 2 or y.shape[-2] != bank.bands:
        raise ShapeError("Band count does not match the bank", expected=bank.bands, actual=y.shape)
    taps = bank.phase_taps
    width = [(0, 0)] * (y.ndim - 1) + [(taps - 1, 0)]
    windows = sliding_window_view(np.pad(y, width), taps, axis=-1)
    kernel = bank.synthesis_kernel.astype(y.dtype, copy=False)
    phases = np.tensordot(windows, kernel, axes=([-3, -1], [1, 2]))
    return phases.reshape(y.shape[:-2] + (-1,))


def analyze(x: Union[Waveform, np.ndarray], bank: PqmfBank, sample_rate: int = 0) -> MultibandSignal:
    """Split a waveform into M bands decimated by M"""
    if isinstance(x, Waveform):
        samples, sample_rate = x.samples, x.sample_rate
    else:
        samples = np.asarray(x)
    if samples.ndim != 1:
        raise ShapeError(f"analyze expects mono input, got shape {samples.shape}")
    if samples.size % bank.bands:
        logger.debug(f"Padding {samples.size} samples to a multiple of {bank.bands}")
    return MultibandSignal(analyze_array(samples, bank), band_rate=sample_rate / bank.bands)


def synthesize(mb: MultibandSignal, bank: PqmfBank) -> Waveform:
    """Upsample, filter with the time-reversed bank and sum; delay is bank.group_delay"""
    if mb.band_count != bank.bands:
        raise ShapeError("Band count does not match the bank", expected=bank.bands, actual=mb.band_count)
    samples = synthesize_array(mb.bands, bank)
    return Waveform(samples, int(round(mb.band_rate * bank.bands)) or 1)
