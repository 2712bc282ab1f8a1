"""
Model Configuration
Architecture hyperparameters with the studio-scale and desk-scale presets
"""

import math
from typing import Dict, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from dsp.signal import is_power_of_two


class ModelConfig(BaseModel):
    """Encoder, decoder, noise head and discriminator shape"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    sample_rate: int = Field(default=16000, gt=0)
    bands: int = Field(default=8, ge=1)
    encoder_hidden: Tuple[int, ...] = (32, 64, 128)
    encoder_strides: Tuple[int, ...] = (4, 4, 2)
    latent_dim: int = Field(default=32, ge=1)
    decoder_capacity: int = Field(default=16, ge=1)
    residual_dilations: Tuple[int, ...] = (1, 3, 9)
    noise_bands: int = Field(default=16, ge=1)
    noise_frame: int = Field(default=16, ge=1)
    discriminator_scales: int = Field(default=3, ge=1)
    discriminator_channels: Tuple[int, ...] = (16, 32, 64, 128, 128)
    discriminator_kernel: int = Field(default=15, ge=3)
    pqmf_taps: int = Field(default=0, ge=0)
    logvar_min: float = -14.0
    logvar_max: float = 6.0
    seed: int = 0

    @model_validator(mode="after")
    def _check_structure(self) -> "ModelConfig":
        if len(self.encoder_hidden) != len(self.encoder_strides) or not self.encoder_strides:
            raise ValueError("encoder_hidden and encoder_strides need the same non-zero length")
        if any(s < 1 for s in self.encoder_strides):
            raise ValueError("encoder strides must be positive")
        if not is_power_of_two(self.bands):
            raise ValueError(f"bands must be a power of two, got {self.bands}")
        frame = math.prod(self.encoder_strides)
        if not is_power_of_two(self.noise_frame) or frame % self.noise_frame:
            raise ValueError(f"noise_frame {self.noise_frame} must be a power of two dividing {frame}")
        if self.discriminator_kernel % 2 == 0:
            raise ValueError("discriminator_kernel must be odd")
        channels = self.discriminator_channels
        if len(channels) < 2:
            raise ValueError("discriminator_channels needs at least two entries")
        for c_in, c_out in zip(channels[:-1], channels[1:]):
            groups = max(c_in // 4, 1)
            if c_in % groups or c_out % groups:
                raise ValueError(f"discriminator channels {c_in}->{c_out} incompatible with {groups} groups")
        if self.logvar_min >= self.logvar_max:
            raise ValueError("logvar_min must be below logvar_max")
        return self

    @property
    def decoder_ratios(self) -> Tuple[int, ...]:
        return tuple(reversed(self.encoder_strides))

    @property
    def total_downsampling(self) -> int:
        return self.bands * math.prod(self.encoder_strides)

    @property
    def latent_rate(self) -> float:
        """Latent frames per second"""
        return self.sample_rate / self.total_downsampling

    @property
    def decoder_width(self) -> int:
        return self.decoder_capacity * 2 ** len(self.encoder_strides)

    @property
    def noise_taps(self) -> int:
        return 2 * self.noise_bands + 1

    @property
    def discriminator_min_length(self) -> int:
        strided = len(self.discriminator_channels) - 1
        return 4 ** strided * 2 ** (self.discriminator_scales - 1)

    @classmethod
    def preset(cls, name: str, **overrides) -> "ModelConfig":
        if name not in PRESETS:
            raise ValueError(f"Unknown preset '{name}', expected one of {sorted(PRESETS)}")
        values = dict(PRESETS[name])
        values.update(overrides)
        return cls(**values)


PRESETS: Dict[str, Dict] = {
    "studio": {
        "sample_rate": 48000,
        "bands": 16,
        "encoder_hidden": (64, 128, 256, 512),
        "encoder_strides": (4, 4, 4, 2),
        "latent_dim": 128,
        "decoder_capacity": 64,
        "noise_frame": 64,
        "discriminator_channels": (16, 64, 256, 1024, 1024),
        "discriminator_kernel": 41,
        "pqmf_taps": 512,
    },
    "desk": {
        "sample_rate": 16000,
        "bands": 8,
        "encoder_hidden": (32, 64, 128),
        "encoder_strides": (4, 4, 2),
        "latent_dim": 32,
        "decoder_capacity": 16,
        "noise_frame": 16,
        "discriminator_channels": (16, 32, 64, 128, 128),
        "discriminator_kernel": 15,
        "pqmf_taps": 256,
    },
}
