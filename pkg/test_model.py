#!/usr/bin/env python3
"""
Model Tests
Configuration arithmetic, encoder and decoder shapes, noise synthesizer and discriminator
"""

import logging
import os
import sys

import numpy as np
import pytest
from scipy.signal import welch

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from autograd import functional as F
from autograd.tensor import Tensor, no_grad
from core.exceptions import ShapeError
from core.seeding import STREAM_INIT, STREAM_NOISE, derive_rng
from model import (
    Decoder, DiscriminatorOutput, Encoder, LatentFrames, ModelConfig, feature_matching, noise_synth
)

# Set up logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def test_studio_preset_arithmetic():
    cfg = ModelConfig.preset("studio")
    assert cfg.total_downsampling == 2048
    assert cfg.latent_rate == pytest.approx(23.4375)
    assert 48000 // cfg.total_downsampling == 23
    assert cfg.decoder_ratios == (2, 4, 4, 4)

    desk = ModelConfig.preset("desk", latent_dim=16)
    assert desk.latent_dim == 16
    assert desk.total_downsampling == 256


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(bands=3)
    with pytest.raises(ValueError):
        ModelConfig(encoder_hidden=(8,), encoder_strides=(2, 2))
    with pytest.raises(ValueError):
        ModelConfig(noise_frame=3)
    with pytest.raises(ValueError):
        ModelConfig(discriminator_kernel=4)
    with pytest.raises(ValueError):
        ModelConfig.preset("huge")
    with pytest.raises(ValueError):
        ModelConfig(unknown_field=1)


def test_studio_generator_size():
    cfg = ModelConfig.preset("studio")
    encoder = Encoder(cfg, derive_rng(0, STREAM_INIT, 0))
    decoder = Decoder(cfg, derive_rng(0, STREAM_INIT, 1))
    count = encoder.parameter_count() + decoder.parameter_count()
    assert 15_000_000 <= count <= 20_000_000
    logger.info(f"✅ Studio-scale generator has {count / 1e6:.2f}M parameters")


def test_encode_shapes_and_alignment(tiny_model):
    x = np.random.default_rng(0).uniform(-0.5, 0.5, (2, 256))
    q = tiny_model.encode(x)
    assert q.mean.shape == (2, 4, 32)
    assert q.log_variance.shape == (2, 4, 32)
    assert np.all(q.log_variance.data >= tiny_model.cfg.logvar_min)
    assert np.all(q.log_variance.data <= tiny_model.cfg.logvar_max)

    frames = tiny_model.latent_frames(x)
    assert isinstance(frames, LatentFrames)
    assert frames.frame_rate == pytest.approx(1000.0)

    with pytest.raises(ShapeError):
        tiny_model.encode(np.zeros((2, 250)))


def test_eval_encode_ignores_batch_companions(tiny_model):
    tiny_model.eval()
    silent = np.zeros((1, 128))
    companion = np.random.default_rng(1).standard_normal((1, 128))
    with no_grad():
        alone = tiny_model.encode(silent)
        paired = tiny_model.encode(np.concatenate([silent, companion]))
    np.testing.assert_allclose(alone.mean.data[0], paired.mean.data[0], atol=1e-6)
    np.testing.assert_allclose(alone.log_variance.data[0], paired.log_variance.data[0], atol=1e-6)


def test_decode_length(tiny_model):
    z = np.random.default_rng(2).standard_normal((1, 4, 10))
    tiny_model.eval()
    with no_grad():
        audio = tiny_model.decode(z)
    assert audio.shape == (1, 1, 10 * tiny_model.cfg.total_downsampling)

    with pytest.raises(ShapeError):
        tiny_model.decode(np.zeros((1, 3, 10)))


def test_silenced_loudness_leaves_noise_head(tiny_model):
    decoder = tiny_model.decoder
    decoder.loudness_head.bias.data[:] = -1e4
    z = Tensor(np.random.default_rng(3).standard_normal((1, 4, 6)))
    tiny_model.eval()
    with no_grad():
        bands = tiny_model.decode_bands(z)
        noise = decoder.noise_head(decoder.hidden(z), derive_rng(tiny_model.cfg.seed, STREAM_NOISE, 0))
    np.testing.assert_allclose(bands.data, noise.data, atol=1e-7)
    logger.info("✅ Closed loudness gate leaves only the noise head")


def test_decode_noise_is_seeded(tiny_model):
    z = np.random.default_rng(4).standard_normal((1, 4, 6))
    tiny_model.eval()
    with no_grad():
        first = tiny_model.decode(z, noise_rng=np.random.default_rng(9)).data
        second = tiny_model.decode(z, noise_rng=np.random.default_rng(9)).data
        default = tiny_model.decode(z).data
    np.testing.assert_array_equal(first, second)
    assert default.shape == first.shape


def _flat_noise(amplitude: np.ndarray, frames: int = 4096, frame: int = 16) -> np.ndarray:
    amps = np.broadcast_to(amplitude, (1, 1, frames, amplitude.size)).copy()
    out = noise_synth(Tensor(amps, dtype=np.float64), frame, np.random.default_rng(5))
    return out.data[0, 0]


def test_noise_synth_silence():
    out = _flat_noise(np.zeros(16))
    assert out.shape == (4096 * 16,)
    assert np.all(out == 0.0)


def test_noise_synth_flat_amplitudes_flat_spectrum():
    out = _flat_noise(np.ones(16))
    freqs, psd = welch(out, fs=1.0, nperseg=256)
    chunks = [psd[(freqs >= lo) & (freqs < lo + 0.1)].mean() for lo in (0.07, 0.17, 0.27, 0.37)]
    spread_db = 10 * np.log10(max(chunks) / min(chunks))
    assert spread_db <= 3.0
    logger.info(f"✅ Flat amplitudes give a spectrum within {spread_db:.2f} dB")


def test_noise_synth_single_band_energy():
    amplitude = np.zeros(16)
    amplitude[5] = 1.0
    out = _flat_noise(amplitude)
    freqs, psd = welch(out, fs=1.0, nperseg=512)
    centre = 6 / 32
    inside = (freqs >= centre - 2 / 32) & (freqs <= centre + 2 / 32)
    assert psd[inside].sum() / psd.sum() >= 0.9


def test_discriminator_scales(tiny_model):
    x = np.random.default_rng(6).uniform(-1, 1, (1, 8192))
    out = tiny_model.discriminate(x)
    assert out.scales == 3
    lengths = [logits.shape[-1] for logits in out.logits]
    assert lengths == [512, 256, 128]
    layers = len(tiny_model.discriminator.scales[0].layers)
    assert all(len(scale) == layers for scale in out.features)

    tiny_model.eval()
    with no_grad():
        a = tiny_model.discriminate(x)
        b = tiny_model.discriminate(x)
    for fa, fb in zip(a.features[2], b.features[2]):
        np.testing.assert_array_equal(fa.data, fb.data)

    with pytest.raises(ShapeError):
        tiny_model.discriminate(np.zeros((1, tiny_model.cfg.discriminator_min_length - 1)))


def test_feature_matching_values():
    rng = np.random.default_rng(7)
    real = DiscriminatorOutput(
        logits=[Tensor(np.zeros((1, 1, 4)))],
        features=[[Tensor(rng.standard_normal((1, 2, 8))), Tensor(rng.standard_normal((1, 3, 4)))]]
    )
    assert feature_matching(real, real).item() == pytest.approx(0.0)

    shifted = DiscriminatorOutput(
        logits=real.logits,
        features=[[Tensor(f.data + 1.0) for f in real.features[0]]]
    )
    assert feature_matching(real, shifted).item() == pytest.approx(1.0, abs=1e-6)

    other = DiscriminatorOutput(
        logits=real.logits,
        features=[[Tensor(rng.standard_normal(f.shape)) for f in real.features[0]]]
    )
    expected = np.mean([np.mean(np.abs(o.data - r.data)) for o, r in zip(other.features[0], real.features[0])])
    assert feature_matching(real, other).item() == pytest.approx(expected, abs=1e-6)

    broken = DiscriminatorOutput(logits=real.logits, features=[real.features[0][:1]])
    with pytest.raises(ShapeError):
        feature_matching(real, broken)


def test_generator_gradients_reach_encoder(tiny_model):
    x = np.random.default_rng(8).uniform(-0.5, 0.5, (2, 64))
    q = tiny_model.encode(x)
    audio = tiny_model.decode(q.mean)
    F.sum(audio * audio).backward()
    assert tiny_model.encoder.mean_head.weight.grad is not None
    assert tiny_model.decoder.conv_in.weight.grad is not None
