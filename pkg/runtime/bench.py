"""
Throughput Benchmark
Samples generated per second from random latents, with and without the multiband front-end
"""

import logging
import os
import platform
import time
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Dict, List

import numpy as np
import pandas as pd
import psutil

from autograd.tensor import no_grad
from core.exceptions import ConfigurationError
from core.seeding import STREAM_LATENT, STREAM_NOISE, derive_rng
from model.config import ModelConfig
from model.rave import RaveModel

logger = logging.getLogger(__name__)

MODES = ("full", "no_multiband")
DEFAULT_TRIALS = 100
WARMUP_TRIALS = 5

# Reported CPU throughput of the full-scale model, kept for comparison only
REFERENCE_CPU_HZ = 985_000.0


@dataclass
class BenchReport:
    """Mean generation speed over timed trials"""
    mode: str
    sample_rate: int
    samples_per_trial: int
    timings: List[float] = field(default_factory=list)
    host: Dict[str, Any] = field(default_factory=dict)

    @property
    def trials(self) -> int:
        return len(self.timings)

    @property
    def mean_time(self) -> float:
        return float(np.mean(self.timings))

    @property
    def samples_per_second(self) -> float:
        return self.samples_per_trial / self.mean_time

    @property
    def realtime_factor(self) -> float:
        return self.samples_per_second / self.sample_rate

    @property
    def coefficient_of_variation(self) -> float:
        return float(np.std(self.timings) / self.mean_time)

    def summary(self) -> Dict[str, Any]:
        return {
            "mode": self.mode,
            "trials": self.trials,
            "sample_rate": self.sample_rate,
            "samples_per_trial": self.samples_per_trial,
            "mean_time_s": self.mean_time,
            "samples_per_second": self.samples_per_second,
            "realtime_factor": self.realtime_factor,
            "timing_cv": self.coefficient_of_variation,
        }

    def to_frame(self) -> pd.DataFrame:
        """One row per trial with the summary columns repeated"""
        frame = pd.DataFrame({"trial": np.arange(self.trials), "seconds": self.timings})
        for key, value in self.summary().items():
            frame[key] = value
        return frame

    def describe(self) -> str:
        return (
            f"{self.mode}: {self.samples_per_second / 1000.0:.1f} kHz over {self.trials} trials, "
            f"{self.realtime_factor:.2f}x realtime (cv {self.coefficient_of_variation:.1%})"
        )


def host_info() -> Dict[str, Any]:
    info = {
        "platform": platform.platform(),
        "python": platform.python_version(),
        "cpu_count": psutil.cpu_count(logical=False),
        "cpu_count_logical": psutil.cpu_count(logical=True),
        "memory_total_gb": psutil.virtual_memory().total / (1024 ** 3),
        "omp_threads": os.environ.get("OMP_NUM_THREADS", "unset"),
        "timestamp": datetime.now().isoformat(),
    }
    try:
        freq = psutil.cpu_freq()
        info["cpu_mhz"] = freq.current if freq else None
    except (AttributeError, NotImplementedError, OSError):
        info["cpu_mhz"] = None
    return info


def single_band_config(cfg: ModelConfig) -> ModelConfig:
    """Same latent rate without the filter bank: strides absorb the band factor"""
    strides = list(cfg.encoder_strides)
    remaining = cfg.bands
    stage = len(strides) - 1
    while remaining > 1:
        strides[stage] *= 2
        remaining //= 2
        stage = stage - 1 if stage > 0 else len(strides) - 1
    return cfg.model_copy(update={
        "bands": 1,
        "encoder_strides": tuple(strides),
        "noise_frame": cfg.noise_frame * cfg.bands,
        "pqmf_taps": 0,
    })


def bench_model(model: RaveModel, mode: str) -> RaveModel:
    if mode not in MODES:
        raise ConfigurationError(f"Unknown benchmark mode '{mode}', expected one of {MODES}")
    if mode == "full" or model.cfg.bands == 1:
        return model
    return RaveModel(single_band_config(model.cfg))


def bench_throughput(
    model: RaveModel,
    mode: str = "full",
    trials: int = DEFAULT_TRIALS,
    seconds: float = 1.0,
    warmup: int = WARMUP_TRIALS,
    seed: int = 0
) -> BenchReport:
    """Time decoding of `seconds` of audio from prior latents, `trials` times after `warmup` untimed runs"""
    if trials < 1:
        raise ConfigurationError(f"trials must be positive, got {trials}")
    target = bench_model(model, mode)
    cfg = target.cfg
    frames = max(1, int(np.ceil(seconds * cfg.sample_rate / cfg.total_downsampling)))
    latents = derive_rng(seed, STREAM_LATENT, 0).standard_normal((1, cfg.latent_dim, frames))
    latents = latents.astype(target.encoder.parameters()[0].dtype)
    target.eval()

    timings = []
    with no_grad():
        for trial in range(warmup + trials):
            noise_rng = derive_rng(seed, STREAM_NOISE, trial)
            start = time.perf_counter()
            target.decode(latents, noise_rng=noise_rng)
            elapsed = time.perf_counter() - start
            if trial >= warmup:
                timings.append(elapsed)

    report = BenchReport(
        mode=mode,
        sample_rate=cfg.sample_rate,
        samples_per_trial=frames * cfg.total_downsampling,
        timings=timings,
        host=host_info()
    )
    logger.info(report.describe())
    return report


def speedup(full: BenchReport, ablation: BenchReport) -> float:
    """Throughput ratio of the multiband model over its single-band counterpart"""
    return full.samples_per_second / ablation.samples_per_second
