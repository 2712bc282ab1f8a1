"""
Encoder
Strided causal convolution stack from multiband audio to the latent posterior
"""

import logging

import numpy as np

from autograd import functional as F
from autograd.nn import BatchNorm1d, Conv1d, LEAKY_SLOPE, Module
from autograd.tensor import Tensor
from dsp.gaussian import DiagonalGaussian
from .config import ModelConfig

logger = logging.getLogger(__name__)


class EncoderBlock(Module):
    """Batch norm, leaky ReLU, then a causal convolution of kernel 2s + 1 and stride s"""

    def __init__(self, in_channels: int, out_channels: int, stride: int, rng: np.random.Generator):
        super().__init__()
        self.norm = BatchNorm1d(in_channels)
        self.conv = Conv1d(in_channels, out_channels, 2 * stride + 1, rng, stride=stride)

    def forward(self, x: Tensor, stream=None) -> Tensor:
        return self.conv(F.leaky_relu(self.norm(x), LEAKY_SLOPE), stream=stream)


class Encoder(Module):
    """Multiband input [B x M x T/M] to mean and log-variance [B x D x frames]"""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        super().__init__()
        self.cfg = cfg
        hidden = cfg.encoder_hidden
        self.conv_in = Conv1d(cfg.bands, hidden[0], 7, rng)
        widths = list(hidden) + [2 * hidden[-1]]
        self.blocks = [
            EncoderBlock(widths[i], widths[i + 1], stride, rng)
            for i, stride in enumerate(cfg.encoder_strides)
        ]
        self.norm_out = BatchNorm1d(widths[-1])
        self.mean_head = Conv1d(widths[-1], cfg.latent_dim, 1, rng)
        self.logvar_head = Conv1d(widths[-1], cfg.latent_dim, 1, rng)

    def forward(self, bands: Tensor, stream=None) -> DiagonalGaussian:
        h = self.conv_in(bands, stream=stream)
        for block in self.blocks:
            h = block(h, stream=stream)
        h = F.leaky_relu(self.norm_out(h), LEAKY_SLOPE)
        mean = self.mean_head(h)
        log_var = F.clamp(self.logvar_head(h), self.cfg.logvar_min, self.cfg.logvar_max)
        return DiagonalGaussian(mean, log_var)
