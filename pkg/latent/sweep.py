"""
Fidelity Sweep
Rank and reconstruction distance of the compact latent across fidelity targets
"""

import logging
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from autograd.tensor import no_grad
from core.seeding import STREAM_PROBE, derive_rng
from dsp.signal import SpectralConfig, spectral_distance
from .analysis import (
    Clips, FidelityBasis, aligned_samples, frames_to_rows, project, reconstruct, rows_to_frames
)

logger = logging.getLogger(__name__)

DEFAULT_FIDELITIES = (0.8, 0.9, 0.95, 0.99)


def compact_roundtrip(model, samples: np.ndarray, basis: FidelityBasis, rank: int, rng: np.random.Generator) -> np.ndarray:
    """Encode, keep `rank` basis coordinates, refill the rest from the prior and decode"""
    with no_grad():
        modes = model.encode(samples[None, :]).mean.data
        compact = project(frames_to_rows(modes), basis, rank)
        restored = rows_to_frames(reconstruct(compact, basis, rng), 1).astype(modes.dtype)
        return model.decode(restored).data[0, 0]


def fidelity_sweep(
    model,
    clips: Clips,
    basis: FidelityBasis,
    fidelities: Sequence[float] = DEFAULT_FIDELITIES,
    spectral: Optional[SpectralConfig] = None,
    seed: int = 0
) -> pd.DataFrame:
    """One row per fidelity: rank and mean spectral distance of compact reconstructions"""
    spectral = spectral or SpectralConfig.for_sample_rate(model.cfg.sample_rate)
    factor = model.cfg.total_downsampling
    signals: List[np.ndarray] = [s for s in (aligned_samples(clip, factor) for clip in clips) if s.size]
    model.eval()

    rows = []
    for f in fidelities:
        rank = basis.rank(f)
        distances = []
        for index, samples in enumerate(signals):
            rng = derive_rng(seed, STREAM_PROBE, 2, index)
            rebuilt = compact_roundtrip(model, samples, basis, rank, rng)
            distances.append(spectral_distance(samples, rebuilt, spectral))
        mean = float(np.mean(distances)) if distances else float("nan")
        logger.info(f"Fidelity {f:.3f}: rank {rank}, spectral distance {mean:.4f}")
        rows.append({"fidelity": f, "rank": rank, "spectral_distance": mean})
    return pd.DataFrame(rows, columns=["fidelity", "rank", "spectral_distance"])
