"""
Multiscale Discriminator
Grouped strided convolution stacks on progressively average-pooled audio
"""

import logging
from dataclasses import dataclass, field
from typing import List, Union

import numpy as np

from autograd import functional as F
from autograd.nn import Conv1d, LEAKY_SLOPE, Module
from autograd.tensor import Tensor
from core.exceptions import ShapeError
from .config import ModelConfig

logger = logging.getLogger(__name__)

FeatureMap = Union[Tensor, np.ndarray]


@dataclass
class DiscriminatorOutput:
    """Logit map and intermediate feature maps for every scale"""
    logits: List[Tensor] = field(default_factory=list)
    features: List[List[Tensor]] = field(default_factory=list)

    @property
    def scales(self) -> int:
        return len(self.logits)

    def detached(self) -> "DiscriminatorOutput":
        return DiscriminatorOutput(
            logits=[t.detach() for t in self.logits],
            features=[[t.detach() for t in scale] for scale in self.features]
        )


class ScaleDiscriminator(Module):
    """Input conv, grouped stride-4 convs, a wide conv, then a single-channel logit conv"""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        super().__init__()
        channels = cfg.discriminator_channels
        layers = [Conv1d(1, channels[0], 15, rng, causal=False)]
        for c_in, c_out in zip(channels[:-1], channels[1:]):
            layers.append(Conv1d(
                c_in, c_out, cfg.discriminator_kernel, rng,
                stride=4, groups=max(c_in // 4, 1), causal=False
            ))
        layers.append(Conv1d(channels[-1], channels[-1], 5, rng, causal=False))
        self.layers = layers
        self.logit = Conv1d(channels[-1], 1, 3, rng, causal=False)

    def forward(self, x: Tensor):
        features = []
        for layer in self.layers:
            x = F.leaky_relu(layer(x), LEAKY_SLOPE)
            features.append(x)
        return self.logit(x), features


class Discriminator(Module):
    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        super().__init__()
        self.cfg = cfg
        self.scales = [ScaleDiscriminator(cfg, rng) for _ in range(cfg.discriminator_scales)]

    def forward(self, x: Tensor) -> DiscriminatorOutput:
        """x is [B x 1 x T]; scale s sees the input average-pooled s times by 2"""
        if x.shape[-1] < self.cfg.discriminator_min_length:
            raise ShapeError(
                f"Discriminator input of {x.shape[-1]} samples is shorter than its "
                f"minimum of {self.cfg.discriminator_min_length}"
            )
        out = DiscriminatorOutput()
        for index, scale in enumerate(self.scales):
            if index:
                x = F.avg_pool1d(x, 2)
            logits, features = scale(x)
            out.logits.append(logits)
            out.features.append(features)
        return out


def _data(t: FeatureMap) -> np.ndarray:
    return t.data if isinstance(t, Tensor) else np.asarray(t)


def feature_matching(real: DiscriminatorOutput, fake: DiscriminatorOutput) -> Tensor:
    """Mean over scales and layers of the mean absolute feature difference

    Real features act as constants; gradients flow through the fake ones.
    """
    if len(real.features) != len(fake.features):
        raise ShapeError("Scale count differs", expected=len(real.features), actual=len(fake.features))
    total = None
    count = 0
    for real_scale, fake_scale in zip(real.features, fake.features):
        if len(real_scale) != len(fake_scale):
            raise ShapeError("Layer count differs", expected=len(real_scale), actual=len(fake_scale))
        for real_map, fake_map in zip(real_scale, fake_scale):
            fake_map = F.as_tensor(fake_map)
            if tuple(_data(real_map).shape) != fake_map.shape:
                raise ShapeError("Feature map shapes differ", expected=_data(real_map).shape, actual=fake_map.shape)
            term = F.mean(F.abs(fake_map - _data(real_map)))
            total = term if total is None else total + term
            count += 1
    if total is None:
        raise ShapeError("No feature maps to compare")
    return total * (1.0 / count)
