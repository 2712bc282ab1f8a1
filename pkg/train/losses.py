"""
Training Objectives
Differentiable spectral distance, KL term, hinge losses and the generator total
"""

import logging
from typing import Sequence, Tuple, Union

import numpy as np

from autograd import functional as F
from autograd.tensor import Tensor, no_grad
from core.exceptions import ShapeError
from dsp.gaussian import DiagonalGaussian, kl_diag_gaussian
from dsp.signal import SpectralConfig, analysis_window

logger = logging.getLogger(__name__)

# Keeps the Frobenius norm differentiable when the spectra coincide
NORM_GUARD = 1e-24

Logits = Sequence[Union[Tensor, np.ndarray]]


def _reference_amplitude(x: np.ndarray, n: int, window: np.ndarray, dtype) -> np.ndarray:
    # Same framing and modulus guard as the candidate so x_hat == x gives a zero difference
    with no_grad():
        return F.stft_amplitude(Tensor(x, dtype=dtype), n, window).data


def spectral_loss(x: np.ndarray, x_hat: Tensor, cfg: SpectralConfig) -> Tensor:
    """Batch mean of the multiscale spectral distance between reference x [B x T] and x_hat

    Gradients flow into x_hat only.
    """
    x = np.asarray(x)
    if x_hat.ndim == 3:
        x_hat = F.reshape(x_hat, (x_hat.shape[0], x_hat.shape[-1]))
    if x.shape != x_hat.shape:
        raise ShapeError("Reference and reconstruction differ in shape", expected=x.shape, actual=x_hat.shape)

    total = None
    for n in cfg.scales:
        window = analysis_window(cfg.window, n)
        reference = _reference_amplitude(x, n, window, x_hat.dtype)
        candidate = F.stft_amplitude(x_hat, n, window)
        diff = candidate - reference
        frobenius = F.sqrt(F.sum(diff * diff, axis=(1, 2)) + NORM_GUARD)
        frobenius = frobenius / (np.sqrt(np.sum(reference.astype(np.float64) ** 2, axis=(1, 2))) + cfg.epsilon)
        log_l1 = F.log(F.sum(F.abs(diff), axis=(1, 2)) + cfg.epsilon)
        term = frobenius + log_l1
        total = term if total is None else total + term
    return F.mean(total)


def kl_loss(q: DiagonalGaussian) -> Tensor:
    """KL summed over latent dimensions, averaged over batch and frames"""
    kl = kl_diag_gaussian(q)
    return F.mean(F.sum(kl, axis=1))


def beta_schedule(step: int, beta: float, warmup_steps: int) -> float:
    """Linear KL warmup reaching beta exactly at warmup_steps"""
    if warmup_steps <= 0:
        return float(beta)
    return float(beta) * min(1.0, step / warmup_steps)


def relu(x: Tensor) -> Tensor:
    return F.clamp(x, 0.0, None)


def hinge_discriminator(real_logits: Logits, fake_logits: Logits) -> Tensor:
    """Mean over scales of E[max(0, 1 - D(x))] + E[max(0, 1 + D(x_hat))]"""
    if len(real_logits) != len(fake_logits) or not real_logits:
        raise ShapeError("Real and fake logits need the same non-zero scale count")
    total = None
    for real, fake in zip(real_logits, fake_logits):
        real, fake = F.as_tensor(real), F.as_tensor(fake)
        term = F.mean(relu(1.0 - real)) + F.mean(relu(fake + 1.0))
        total = term if total is None else total + term
    return total * (1.0 / len(real_logits))


def hinge_generator(fake_logits: Logits) -> Tensor:
    """Negative mean fake logit, averaged over scales"""
    if not fake_logits:
        raise ShapeError("No logits given")
    total = None
    for fake in fake_logits:
        term = F.mean(F.as_tensor(fake))
        total = term if total is None else total + term
    return total * (-1.0 / len(fake_logits))


def generator_objective(
    adversarial: Tensor,
    spectral: Tensor,
    feature_matching: Tensor,
    weights: Tuple[float, float, float]
) -> Tensor:
    """weights are (spectral, feature matching, adversarial)"""
    w_spectral, w_fm, w_adversarial = weights
    return adversarial * w_adversarial + spectral * w_spectral + feature_matching * w_fm


def discriminator_accuracy(real_logits: Logits, fake_logits: Logits) -> float:
    """Fraction of positive real and negative fake logits, averaged over scales"""
    scores = []
    for real, fake in zip(real_logits, fake_logits):
        real_data = real.data if isinstance(real, Tensor) else np.asarray(real)
        fake_data = fake.data if isinstance(fake, Tensor) else np.asarray(fake)
        scores.append(0.5 * (np.mean(real_data > 0) + np.mean(fake_data < 0)))
    return float(np.mean(scores))
