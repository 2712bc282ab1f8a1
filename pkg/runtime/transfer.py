"""
Timbre Transfer
Resynthesize foreign audio through a trained model and report how far it sits from the training domain
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from autograd.tensor import no_grad
from core.exceptions import DataError
from dsp.gaussian import DiagonalGaussian, kl_diag_gaussian
from dsp.signal import Waveform
from model.rave import RaveModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TransferResult:
    """Resynthesized audio plus the mean posterior KL of the input (and of an optional in-domain reference)"""
    output: Waveform
    mean_kl: float
    reference_kl: Optional[float] = None

    @property
    def kl_ratio(self) -> Optional[float]:
        if self.reference_kl is None or self.reference_kl <= 0.0:
            return None
        return self.mean_kl / self.reference_kl


def _fit_length(samples: np.ndarray, factor: int) -> np.ndarray:
    """Zero-pad to the next multiple of the downsampling factor"""
    remainder = samples.size % factor
    if remainder:
        samples = np.concatenate([samples, np.zeros(factor - remainder, dtype=samples.dtype)])
    return samples


def _posterior(model: RaveModel, x: Waveform) -> DiagonalGaussian:
    if x.sample_rate != model.cfg.sample_rate:
        raise DataError(f"Input is {x.sample_rate} Hz but the model runs at {model.cfg.sample_rate} Hz")
    if len(x) == 0:
        raise DataError("Input clip is empty")
    samples = _fit_length(x.samples, model.cfg.total_downsampling)
    model.eval()
    with no_grad():
        return model.encode(samples[None, :])


def _mean_kl(q: DiagonalGaussian) -> float:
    kl = kl_diag_gaussian(DiagonalGaussian(q.mean.data, q.log_variance.data))
    return float(np.mean(np.sum(kl, axis=1)))


def mean_posterior_kl(model: RaveModel, x: Waveform) -> float:
    """KL summed over latent dimensions, averaged over frames"""
    return _mean_kl(_posterior(model, x))


def timbre_transfer(model: RaveModel, x: Waveform, reference: Optional[Waveform] = None) -> TransferResult:
    """decode(posterior mode of encode(x)), trimmed back to the input length"""
    q = _posterior(model, x)
    with no_grad():
        audio = model.decode(q.mean).data[0, 0, :len(x)]
    mean_kl = _mean_kl(q)
    reference_kl = mean_posterior_kl(model, reference) if reference is not None else None
    logger.info(
        f"Transferred {x.duration:.2f} s; mean KL {mean_kl:.4f}"
        + (f", in-domain reference {reference_kl:.4f}" if reference_kl is not None else "")
    )
    output = Waveform(np.clip(audio.astype(np.float64), -1.0, 1.0), model.cfg.sample_rate)
    return TransferResult(output=output, mean_kl=mean_kl, reference_kl=reference_kl)
