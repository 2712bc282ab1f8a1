"""
Test session setup - single-threaded BLAS before numpy is imported, shared tiny model fixtures
"""

import os

for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from model.config import ModelConfig  # noqa: E402
from model.rave import RaveModel  # noqa: E402
from train.config import TrainConfig  # noqa: E402

# Total downsampling 8, discriminator minimum input 64 samples
TINY_MODEL = dict(
    sample_rate=8000,
    bands=2,
    pqmf_taps=64,
    encoder_hidden=(8, 8),
    encoder_strides=(2, 2),
    latent_dim=4,
    decoder_capacity=4,
    noise_bands=8,
    noise_frame=2,
    discriminator_channels=(4, 4, 4),
    discriminator_kernel=5,
)


@pytest.fixture
def tiny_config() -> ModelConfig:
    return ModelConfig(**TINY_MODEL)


@pytest.fixture
def tiny_model(tiny_config) -> RaveModel:
    return RaveModel(tiny_config)


@pytest.fixture
def tiny_train_config() -> TrainConfig:
    return TrainConfig(
        batch_size=2,
        n_signal=256,
        stage1_steps=3,
        stage2_steps=2,
        beta_warmup_steps=2,
        log_every=1,
        checkpoint_every=0,
        probe_every=0,
    )


@pytest.fixture
def tone_clips():
    """Short deterministic harmonic tones at 8 kHz"""
    from dsp.signal import Waveform

    rate = 8000
    t = np.arange(2048) / rate
    clips = []
    for index, f0 in enumerate((220.0, 330.0, 440.0, 550.0)):
        audio = 0.5 * np.sin(2 * np.pi * f0 * t) + 0.2 * np.sin(2 * np.pi * 2 * f0 * t + index)
        clips.append(Waveform(audio, rate))
    return clips
