"""
Prototype Lowpass Design
Kaiser-windowed sinc whose shape and cutoff are tuned on a white-noise round trip

The cutoff is expressed relative to Nyquist, so 1/(2M) is the nominal band
edge. For every Kaiser beta on the grid the cutoff is first fitted with a
cheap criterion (the autocorrelation of the prototype should vanish at
non-zero multiples of 2M); the beta with the best measured round-trip SNR
then gets a final cutoff refinement against the round trip itself.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.optimize import minimize_scalar
from scipy.signal import firwin

from core.exceptions import ConfigurationError, DesignError

logger = logging.getLogger(__name__)

TAPS_PER_BAND = 32
MIN_TAPS_PER_BAND = 8


class SearchConfig(BaseModel):
    """Grid and acceptance settings of the prototype search"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    beta_min: float = Field(default=1.0, ge=0.0)
    beta_max: float = Field(default=18.0, le=30.0)
    beta_step: float = Field(default=0.1, gt=0.0)
    cutoff_span: float = Field(default=0.5, gt=0.0, lt=1.0)
    cutoff_grid: int = Field(default=41, ge=5)
    refine_span: float = Field(default=0.02, gt=0.0)
    snr_floor_db: float = 60.0
    noise_length: int = Field(default=8192, ge=1024)
    seed: int = 0


@dataclass(frozen=True)
class PrototypeFilter:
    """Lowpass prototype of the cosine-modulated bank"""
    taps: np.ndarray
    kaiser_beta: float
    cutoff: float
    snr_db: float = float("inf")
    diagnostics: Dict[str, float] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.float64)
        if taps.ndim != 1 or taps.size == 0 or not np.all(np.isfinite(taps)):
            raise DesignError("Prototype taps must be a finite 1-D sequence")
        object.__setattr__(self, "taps", taps)

    @property
    def length(self) -> int:
        return int(self.taps.size)


def default_taps(bands: int) -> int:
    return 1 if bands == 1 else TAPS_PER_BAND * bands


def kaiser_sinc(taps: int, cutoff: float, beta: float) -> np.ndarray:
    return firwin(taps, cutoff, window=("kaiser", beta))


def nyquist_residual(prototype: np.ndarray, bands: int) -> float:
    """Largest autocorrelation value at non-zero lags that are multiples of 2M"""
    autocorr = np.convolve(prototype, prototype[::-1])
    center = prototype.size - 1
    lags = np.arange(2 * bands, center + 1, 2 * bands)
    if lags.size == 0:
        return 0.0
    peak = autocorr[center]
    return float(np.max(np.abs(autocorr[center + lags])) / peak)


def _fit_cutoff(bands: int, taps: int, beta: float, cfg: SearchConfig) -> float:
    nominal = 1.0 / (2 * bands)
    low, high = nominal * (1.0 - cfg.cutoff_span), min(nominal * (1.0 + cfg.cutoff_span), 0.999)
    grid = np.linspace(low, high, cfg.cutoff_grid)
    scores = [nyquist_residual(kaiser_sinc(taps, c, beta), bands) for c in grid]
    best = int(np.argmin(scores))
    left, right = grid[max(best - 1, 0)], grid[min(best + 1, grid.size - 1)]
    if right <= left:
        return float(grid[best])
    result = minimize_scalar(
        lambda c: nyquist_residual(kaiser_sinc(taps, c, beta), bands),
        bounds=(left, right), method="bounded", options={"xatol": 1e-7}
    )
    return float(result.x) if result.fun <= scores[best] else float(grid[best])


def _round_trip_snr(bands: int, prototype: np.ndarray, cfg: SearchConfig) -> float:
    from .bank import modulate_bank

    bank = modulate_bank(PrototypeFilter(prototype, 0.0, 0.0), bands, calibrate=False)
    return bank.round_trip_snr(cfg.noise_length, cfg.seed)


def _search(bands: int, taps: int, cfg: SearchConfig) -> PrototypeFilter:
    betas = np.arange(cfg.beta_min, cfg.beta_max + cfg.beta_step / 2, cfg.beta_step)
    best_snr, best_beta, best_cutoff = -np.inf, float(betas[0]), 1.0 / (2 * bands)
    for beta in betas:
        cutoff = _fit_cutoff(bands, taps, float(beta), cfg)
        snr = _round_trip_snr(bands, kaiser_sinc(taps, cutoff, float(beta)), cfg)
        if snr > best_snr:
            best_snr, best_beta, best_cutoff = snr, float(beta), cutoff

    def objective(cutoff: float) -> float:
        return -_round_trip_snr(bands, kaiser_sinc(taps, cutoff, best_beta), cfg)

    refined = minimize_scalar(
        objective,
        bounds=(best_cutoff * (1.0 - cfg.refine_span), best_cutoff * (1.0 + cfg.refine_span)),
        method="bounded", options={"xatol": 1e-8}
    )
    if -refined.fun > best_snr:
        best_snr, best_cutoff = float(-refined.fun), float(refined.x)

    diagnostics = {
        "bands": float(bands), "taps": float(taps),
        "beta": best_beta, "cutoff": best_cutoff, "snr_db": best_snr,
        "snr_floor_db": cfg.snr_floor_db
    }
    if best_snr < cfg.snr_floor_db:
        raise DesignError(
            f"Best round-trip SNR {best_snr:.1f} dB is below the {cfg.snr_floor_db:.0f} dB floor",
            diagnostics=diagnostics
        )
    logger.info(f"Prototype for M={bands}, L={taps}: beta={best_beta:.1f}, cutoff={best_cutoff:.6f}, SNR={best_snr:.1f} dB")
    return PrototypeFilter(kaiser_sinc(taps, best_cutoff, best_beta), best_beta, best_cutoff, best_snr, diagnostics)


@lru_cache(maxsize=16)
def _cached_design(bands: int, taps: int, cfg: SearchConfig) -> PrototypeFilter:
    return _search(bands, taps, cfg)


def design_prototype(bands: int, taps: int = 0, search_cfg: SearchConfig = SearchConfig()) -> PrototypeFilter:
    """Prototype lowpass for an M-band bank; taps defaults to 32 per band

    A single band needs no splitting, so its prototype is a unit impulse.
    """
    if bands < 1:
        raise ConfigurationError(f"Band count must be at least 1, got {bands}")
    if bands == 1:
        return PrototypeFilter(np.ones(1), kaiser_beta=0.0, cutoff=1.0)
    taps = taps or default_taps(bands)
    if taps < MIN_TAPS_PER_BAND * bands:
        raise ConfigurationError(f"Prototype needs at least {MIN_TAPS_PER_BAND * bands} taps for {bands} bands, got {taps}")
    if taps % bands:
        raise ConfigurationError(f"Prototype length {taps} must be a multiple of the band count {bands}")
    return _cached_design(bands, taps, search_cfg)
