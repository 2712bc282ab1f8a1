"""
Diagonal Gaussian Posterior
KL divergence to the standard normal prior and the reparameterized sample

Both functions accept plain arrays or autograd tensors; with tensors the
result stays on the graph so gradients flow to the mean and log-variance.
"""

from dataclasses import dataclass
from typing import Union

import numpy as np

from autograd import functional as F
from autograd.tensor import Tensor
from core.exceptions import DataError, ShapeError

ArrayLike = Union[np.ndarray, Tensor]


@dataclass(frozen=True)
class DiagonalGaussian:
    """Posterior q(z|x) parametrized by mean and log-variance"""
    mean: ArrayLike
    log_variance: ArrayLike

    def __post_init__(self):
        if tuple(self.mean.shape) != tuple(self.log_variance.shape):
            raise ShapeError(
                "Mean and log-variance shapes differ",
                expected=tuple(self.mean.shape), actual=tuple(self.log_variance.shape)
            )
        for part in (self.mean, self.log_variance):
            values = part.data if isinstance(part, Tensor) else np.asarray(part)
            if not np.all(np.isfinite(values)):
                raise DataError("Gaussian parameters must be finite")

    @property
    def mode(self) -> ArrayLike:
        """The posterior mode, which for a Gaussian is its mean"""
        return self.mean

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0]) if len(self.mean.shape) == 1 else int(self.mean.shape[-2])


def kl_diag_gaussian(q: DiagonalGaussian) -> ArrayLike:
    """Elementwise KL(q || N(0, 1)) = 0.5 (mu^2 + sigma^2 - log sigma^2 - 1)"""
    mean, log_var = q.mean, q.log_variance
    if isinstance(mean, Tensor) or isinstance(log_var, Tensor):
        mean, log_var = F.as_tensor(mean), F.as_tensor(log_var)
        return (mean * mean + F.exp(log_var) - log_var - 1.0) * 0.5
    mean, log_var = np.asarray(mean, dtype=np.float64), np.asarray(log_var, dtype=np.float64)
    return 0.5 * (mean ** 2 + np.exp(log_var) - log_var - 1.0)


def reparameterize(q: DiagonalGaussian, noise: np.ndarray) -> ArrayLike:
    """z = mu + exp(logvar / 2) * noise"""
    noise = np.asarray(noise)
    if noise.shape != tuple(q.mean.shape):
        raise ShapeError("Noise shape must match the posterior", expected=tuple(q.mean.shape), actual=noise.shape)
    mean, log_var = q.mean, q.log_variance
    if isinstance(mean, Tensor) or isinstance(log_var, Tensor):
        mean, log_var = F.as_tensor(mean), F.as_tensor(log_var)
        return mean + F.exp(log_var * 0.5) * noise
    return np.asarray(mean) + np.exp(0.5 * np.asarray(log_var)) * noise
