"""
RAVE Model
Encoder, decoder and discriminator assembled around the multiband filter bank
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Union

import numpy as np

from autograd import functional as F
from autograd.nn import Module, Parameter
from autograd.tensor import Tensor
from core.exceptions import ShapeError
from core.seeding import STREAM_INIT, derive_rng
from dsp.gaussian import DiagonalGaussian
from pqmf.bank import PqmfBank, build_bank
from .config import ModelConfig
from .decoder import Decoder
from .discriminator import Discriminator, DiscriminatorOutput
from .encoder import Encoder
from .multiband import PqmfAnalysis, PqmfSynthesis, as_signal_tensor

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LatentFrames:
    """Latent trajectories [B x D x frames] at the latent frame rate"""
    values: np.ndarray
    frame_rate: float

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 3:
            raise ShapeError(f"Latent frames must be [B x D x frames], got shape {values.shape}")
        object.__setattr__(self, "values", values)

    @property
    def latent_dim(self) -> int:
        return int(self.values.shape[1])

    @property
    def frames(self) -> int:
        return int(self.values.shape[2])


class RaveModel(Module):
    """The full autoencoder plus its adversary"""

    def __init__(self, cfg: ModelConfig, bank: Optional[PqmfBank] = None):
        super().__init__()
        self.cfg = cfg
        self.bank = bank if bank is not None else build_bank(cfg.bands, cfg.pqmf_taps)
        if self.bank.bands != cfg.bands:
            raise ShapeError("Filter bank band count differs from the model", expected=cfg.bands, actual=self.bank.bands)
        self.analysis = PqmfAnalysis(self.bank)
        self.synthesis = PqmfSynthesis(self.bank)
        self.encoder = Encoder(cfg, derive_rng(cfg.seed, STREAM_INIT, 0))
        self.decoder = Decoder(cfg, derive_rng(cfg.seed, STREAM_INIT, 1))
        self.discriminator = Discriminator(cfg, derive_rng(cfg.seed, STREAM_INIT, 2))
        logger.debug(
            f"Built model: {self.generator_parameter_count()} generator and "
            f"{self.discriminator.parameter_count()} discriminator parameters"
        )

    def generator_parameters(self) -> List[Parameter]:
        return self.encoder.parameters() + self.decoder.parameters()

    def generator_parameter_count(self) -> int:
        return self.encoder.parameter_count() + self.decoder.parameter_count()

    def check_length(self, length: int) -> None:
        factor = self.cfg.total_downsampling
        if length % factor:
            raise ShapeError(f"Signal length {length} is not a multiple of the downsampling factor {factor}")

    def encode(self, x: Union[np.ndarray, Tensor], stream=None) -> DiagonalGaussian:
        """Audio [B x T] to the posterior over [B x D x T/factor]"""
        signal = as_signal_tensor(x)
        self.check_length(signal.shape[-1])
        return self.encoder(self.analysis(signal, stream=stream), stream=stream)

    def latent_frames(self, x: Union[np.ndarray, Tensor]) -> LatentFrames:
        return LatentFrames(np.asarray(self.encode(x).mean.data), self.cfg.latent_rate)

    def decode_bands(
        self,
        z: Union[np.ndarray, Tensor, LatentFrames],
        noise_rng: Optional[np.random.Generator] = None,
        stream=None
    ) -> Tensor:
        if isinstance(z, LatentFrames):
            z = z.values
        return self.decoder(F.as_tensor(z), noise_rng=noise_rng, stream=stream)

    def decode(
        self,
        z: Union[np.ndarray, Tensor, LatentFrames],
        noise_rng: Optional[np.random.Generator] = None,
        stream=None
    ) -> Tensor:
        """Latent frames to audio [B x 1 x frames * factor]"""
        return self.synthesis(self.decode_bands(z, noise_rng, stream), stream=stream)

    def discriminate(self, x: Union[np.ndarray, Tensor]) -> DiscriminatorOutput:
        return self.discriminator(as_signal_tensor(x))
