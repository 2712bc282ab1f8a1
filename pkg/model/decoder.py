"""
Decoder
Upsampling stages with residual stacks feeding the waveform, loudness and noise heads
"""

import logging
from typing import Optional

import numpy as np

from autograd import functional as F
from autograd.nn import Conv1d, ConvTranspose1d, LEAKY_SLOPE, Module
from autograd.tensor import Tensor
from core.exceptions import ShapeError
from core.seeding import STREAM_NOISE, derive_rng
from .config import ModelConfig
from .noise import NoiseHead

logger = logging.getLogger(__name__)


class ResidualUnit(Module):
    def __init__(self, channels: int, dilation: int, rng: np.random.Generator):
        super().__init__()
        self.conv1 = Conv1d(channels, channels, 3, rng, dilation=dilation)
        self.conv2 = Conv1d(channels, channels, 3, rng)

    def forward(self, x: Tensor, stream=None) -> Tensor:
        y = self.conv1(F.leaky_relu(x, LEAKY_SLOPE), stream=stream)
        y = self.conv2(F.leaky_relu(y, LEAKY_SLOPE), stream=stream)
        return x + y


class UpsampleStage(Module):
    """Leaky ReLU, transposed convolution halving the width, residual stack"""

    def __init__(self, in_channels: int, ratio: int, dilations, rng: np.random.Generator):
        super().__init__()
        out_channels = in_channels // 2
        self.upsample = ConvTranspose1d(in_channels, out_channels, ratio, rng)
        self.residuals = [ResidualUnit(out_channels, d, rng) for d in dilations]

    def forward(self, x: Tensor, stream=None) -> Tensor:
        h = self.upsample(F.leaky_relu(x, LEAKY_SLOPE), stream=stream)
        for unit in self.residuals:
            h = unit(h, stream=stream)
        return h


class Decoder(Module):
    """Latent [B x D x frames] to multiband audio [B x M x frames * prod(ratios)]"""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        super().__init__()
        self.cfg = cfg
        width = cfg.decoder_width
        self.conv_in = Conv1d(cfg.latent_dim, width, 7, rng)
        self.stages = []
        for ratio in cfg.decoder_ratios:
            self.stages.append(UpsampleStage(width, ratio, cfg.residual_dilations, rng))
            width //= 2
        self.wave_head = Conv1d(width, cfg.bands, 7, rng)
        self.loudness_head = Conv1d(width, 1, 7, rng)
        self.noise_head = NoiseHead(cfg, rng)

    def hidden(self, z: Tensor, stream=None) -> Tensor:
        if z.ndim != 3 or z.shape[1] != self.cfg.latent_dim:
            raise ShapeError("Latent channel count mismatch", expected=self.cfg.latent_dim, actual=z.shape)
        h = self.conv_in(z, stream=stream)
        for stage in self.stages:
            h = stage(h, stream=stream)
        return F.leaky_relu(h, LEAKY_SLOPE)

    def harmonic(self, h: Tensor, stream=None) -> Tensor:
        """tanh waveform head gated by the sigmoid loudness envelope; bounded by 1"""
        wave = F.tanh(self.wave_head(h, stream=stream))
        loudness = F.sigmoid(self.loudness_head(h, stream=stream))
        return wave * F.expand_channels(loudness, self.cfg.bands)

    def forward(self, z: Tensor, noise_rng: Optional[np.random.Generator] = None, stream=None) -> Tensor:
        h = self.hidden(z, stream)
        if stream is not None:
            noise_rng = stream.noise_rng
        elif noise_rng is None:
            noise_rng = derive_rng(self.cfg.seed, STREAM_NOISE, 0)
        return self.harmonic(h, stream) + self.noise_head(h, noise_rng, stream)
