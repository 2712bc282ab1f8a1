"""
Latent Space Analysis
Posterior-mode collection, SVD basis, fidelity rank, projection and per-dimension KL
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Union

import numpy as np
from scipy import linalg

from autograd.tensor import no_grad
from core.exceptions import ConfigurationError, DataError, NumericError, ShapeError
from core.seeding import STREAM_PROBE, derive_rng
from dsp.gaussian import DiagonalGaussian, kl_diag_gaussian
from dsp.signal import Waveform

logger = logging.getLogger(__name__)

DEFAULT_MAX_SAMPLES = 4096
KL_THRESHOLDS = (0.01, 0.1)

Clips = Iterable[Union[Waveform, np.ndarray]]


@dataclass(frozen=True)
class LatentMatrix:
    """Centered posterior modes, one latent frame per row"""
    z_prime: np.ndarray
    mean: np.ndarray

    @property
    def samples(self) -> int:
        return int(self.z_prime.shape[0])

    @property
    def dim(self) -> int:
        return int(self.z_prime.shape[1])


@dataclass(frozen=True)
class FidelityBasis:
    """Right singular vectors (columns of v), singular values and the removed mean"""
    v: np.ndarray
    singular_values: np.ndarray
    mean: np.ndarray
    sample_count: int

    @property
    def dim(self) -> int:
        return int(self.v.shape[0])

    def rank(self, fidelity: float) -> int:
        return rank_for_fidelity(self.singular_values, fidelity)

    def to_arrays(self, prefix: str = "basis") -> Dict[str, np.ndarray]:
        return {
            f"{prefix}.v": self.v,
            f"{prefix}.singular_values": self.singular_values,
            f"{prefix}.mean": self.mean,
            f"{prefix}.sample_count": np.array([self.sample_count], dtype=np.float64),
        }

    @classmethod
    def from_arrays(cls, arrays: Dict[str, np.ndarray], prefix: str = "basis") -> "FidelityBasis":
        return cls(
            v=np.asarray(arrays[f"{prefix}.v"], dtype=np.float64),
            singular_values=np.asarray(arrays[f"{prefix}.singular_values"], dtype=np.float64),
            mean=np.asarray(arrays[f"{prefix}.mean"], dtype=np.float64),
            sample_count=int(np.asarray(arrays[f"{prefix}.sample_count"]).reshape(-1)[0]),
        )


@dataclass(frozen=True)
class CompactLatent:
    """Leading basis coordinates; values[..., :rank]"""
    values: np.ndarray
    rank: int
    fidelity: Optional[float] = None


@dataclass(frozen=True)
class KLReport:
    """Mean KL per latent dimension plus threshold counts"""
    per_dimension: np.ndarray

    @property
    def order(self) -> np.ndarray:
        """Dimensions sorted by decreasing KL"""
        return np.argsort(-self.per_dimension, kind="stable")

    @property
    def sorted_values(self) -> np.ndarray:
        return self.per_dimension[self.order]

    def count_above(self, threshold: float) -> int:
        return int(np.sum(self.per_dimension > threshold))

    def counts(self) -> Dict[float, int]:
        return {threshold: self.count_above(threshold) for threshold in KL_THRESHOLDS}


def latent_matrix(modes: np.ndarray) -> LatentMatrix:
    """Center a [rows x d] matrix of posterior modes"""
    modes = np.asarray(modes, dtype=np.float64)
    if modes.ndim != 2 or modes.shape[0] == 0:
        raise DataError(f"Latent matrix needs at least one row, got shape {modes.shape}")
    mean = modes.mean(axis=0)
    centered = modes - mean
    # collapsed dimensions center to exact zeros, not rounding residue
    centered[:, np.ptp(modes, axis=0) == 0.0] = 0.0
    return LatentMatrix(centered, mean)


def frames_to_rows(values: np.ndarray) -> np.ndarray:
    """[B x D x T] latent frames to [B*T x D] rows"""
    values = np.asarray(values)
    return values.transpose(0, 2, 1).reshape(-1, values.shape[1])


def rows_to_frames(rows: np.ndarray, batch: int) -> np.ndarray:
    rows = np.asarray(rows)
    return rows.reshape(batch, -1, rows.shape[-1]).transpose(0, 2, 1)


def aligned_samples(clip: Union[Waveform, np.ndarray], factor: int) -> np.ndarray:
    samples = clip.samples if isinstance(clip, Waveform) else np.asarray(clip)
    usable = samples.size - samples.size % factor
    return samples[:usable]


def posterior_frames(model, clips: Clips) -> Iterable[DiagonalGaussian]:
    """Eval-mode posteriors of each clip, trimmed to the downsampling grid"""
    factor = model.cfg.total_downsampling
    model.eval()
    with no_grad():
        for clip in clips:
            samples = aligned_samples(clip, factor)
            if samples.size == 0:
                continue
            yield model.encode(samples[None, :])


def collect_latents(model, clips: Clips, max_samples: int = DEFAULT_MAX_SAMPLES, seed: int = 0) -> LatentMatrix:
    """Posterior means of every latent frame, subsampled to max_samples rows, centered"""
    rows = [frames_to_rows(q.mean.data) for q in posterior_frames(model, clips)]
    if not rows:
        raise DataError("No clip long enough to encode")
    modes = np.concatenate(rows, axis=0)
    if modes.shape[0] > max_samples:
        rng = derive_rng(seed, STREAM_PROBE, 1)
        keep = np.sort(rng.choice(modes.shape[0], size=max_samples, replace=False))
        modes = modes[keep]
    logger.info(f"Collected {modes.shape[0]} latent frames of dimension {modes.shape[1]}")
    return latent_matrix(modes)


def fit_basis(z: LatentMatrix) -> FidelityBasis:
    """SVD Z' = U S V^T with each column of V signed so its first nonzero entry is positive"""
    b, d = z.z_prime.shape
    if b < d:
        logger.warning(f"Only {b} latent samples for {d} dimensions; trailing singular values are zero")
    try:
        _, s, vh = linalg.svd(z.z_prime, full_matrices=b < d)
    except (linalg.LinAlgError, ValueError) as e:
        raise NumericError(f"SVD of the latent matrix failed: {e}", diagnostics={"rows": b, "dims": d}) from e
    singular = np.zeros(d)
    singular[:s.size] = s
    v = vh.T.copy()
    for column in range(d):
        nonzero = np.flatnonzero(np.abs(v[:, column]) > 1e-12)
        if nonzero.size and v[nonzero[0], column] < 0:
            v[:, column] *= -1.0
    return FidelityBasis(v=v, singular_values=singular, mean=z.mean.copy(), sample_count=b)


def rank_for_fidelity(singular_values: np.ndarray, fidelity: float) -> int:
    """Smallest r with sum(S[:r]) / sum(S) >= fidelity; never below 1, full width at fidelity 1"""
    if not 0.0 <= fidelity <= 1.0:
        raise ConfigurationError(f"Fidelity must lie in [0, 1], got {fidelity}")
    s = np.asarray(singular_values, dtype=np.float64)
    if fidelity >= 1.0:
        return max(1, s.size)
    cumulative = np.cumsum(s)
    total = cumulative[-1]
    if total <= 0.0:
        return 1
    ratios = cumulative / total
    rank = int(np.argmax(ratios >= fidelity)) + 1
    return max(rank, 1)


def project(z: np.ndarray, basis: FidelityBasis, rank: int, fidelity: Optional[float] = None) -> CompactLatent:
    """First `rank` coordinates of (z - mean) V for latent rows [..., d]"""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != basis.dim:
        raise ShapeError("Latent dimension differs from the basis", expected=basis.dim, actual=z.shape[-1])
    if not 1 <= rank <= basis.dim:
        raise ShapeError(f"Rank {rank} outside [1, {basis.dim}]")
    coordinates = (z - basis.mean) @ basis.v
    return CompactLatent(coordinates[..., :rank], rank, fidelity)


def reconstruct(
    zf: CompactLatent,
    basis: FidelityBasis,
    rng: Optional[np.random.Generator] = None,
    noise: Optional[np.ndarray] = None
) -> np.ndarray:
    """Refill the trailing d - rank coordinates with prior noise, rotate back, re-add the mean

    `noise` overrides the draw and must have the trailing-coordinate shape.
    """
    values = np.asarray(zf.values, dtype=np.float64)
    if values.shape[-1] != zf.rank or not 1 <= zf.rank <= basis.dim:
        raise ShapeError("Compact latent rank does not fit the basis", expected=zf.rank, actual=values.shape[-1])
    trailing_shape = values.shape[:-1] + (basis.dim - zf.rank,)
    if noise is None:
        rng = rng if rng is not None else np.random.default_rng()
        noise = rng.standard_normal(trailing_shape)
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != trailing_shape:
        raise ShapeError("Noise shape does not match the trailing coordinates", expected=trailing_shape, actual=noise.shape)
    full = np.concatenate([values, noise], axis=-1)
    return full @ basis.v.T + basis.mean


def kl_report(posteriors: Iterable[DiagonalGaussian]) -> KLReport:
    """Per-dimension KL averaged over every frame of every posterior [B x D x T]"""
    total, count = None, 0
    for q in posteriors:
        mean = q.mean.data if hasattr(q.mean, "data") else np.asarray(q.mean)
        log_var = q.log_variance.data if hasattr(q.log_variance, "data") else np.asarray(q.log_variance)
        kl = kl_diag_gaussian(DiagonalGaussian(np.asarray(mean, dtype=np.float64), np.asarray(log_var, dtype=np.float64)))
        summed = kl.sum(axis=(0, 2))
        total = summed if total is None else total + summed
        count += kl.shape[0] * kl.shape[2]
    if total is None or count == 0:
        raise DataError("No posteriors to report on")
    return KLReport(total / count)


def kl_per_dimension_report(model, clips: Clips) -> KLReport:
    report = kl_report(posterior_frames(model, clips))
    counts = report.counts()
    logger.info(f"KL report: {counts[0.01]} dims above 0.01, {counts[0.1]} above 0.1")
    return report
