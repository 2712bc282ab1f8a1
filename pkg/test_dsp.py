#!/usr/bin/env python3
"""
Signal Processing Tests
STFT amplitude, multiscale spectral distance, Gaussian helpers and augmentations
"""

import logging
import math
import os
import sys

import numpy as np
import pytest
from scipy.signal import welch

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from core.exceptions import ConfigurationError, DataError, ShapeError
from dsp.augment import dequantize, random_allpass, random_crop
from dsp.gaussian import DiagonalGaussian, kl_diag_gaussian, reparameterize
from dsp.signal import (
    SpectralConfig, Waveform, frame_count, spectral_distance, spectral_floor,
    spectral_terms, stft_amplitude
)

# Set up logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def test_stft_amplitude_zero_and_frame_count():
    spec = stft_amplitude(np.zeros(256), 64)
    assert np.all(spec.magnitudes == 0.0)
    assert spec.bins == 33

    x = np.random.default_rng(0).standard_normal(256)
    spec = stft_amplitude(x, 128)
    assert spec.frames == 5 == frame_count(256, 128)
    assert np.all(spec.magnitudes >= 0.0)
    logger.info("✅ STFT framing and zero input")


def test_stft_amplitude_single_cosine_bin():
    n, k = 64, 5
    t = np.arange(n)
    spec = stft_amplitude(np.cos(2 * np.pi * k * t / n), n, window="rect")
    frame = spec.magnitudes[0]
    assert np.argmax(frame) == k
    others = np.delete(frame, k)
    assert np.max(others) < 1e-9 * frame[k]
    logger.info("✅ Cosine energy lands in one bin")


def test_stft_rejects_non_power_of_two():
    with pytest.raises(ConfigurationError):
        stft_amplitude(np.zeros(300), 100)


def test_stft_concatenation_at_frame_boundary():
    rng = np.random.default_rng(3)
    n = 64
    a = rng.standard_normal(4 * n)
    b = rng.standard_normal(4 * n)
    joined = stft_amplitude(np.concatenate([a, b]), n).magnitudes
    first = stft_amplitude(a, n).magnitudes
    second = stft_amplitude(b, n).magnitudes
    hop = n // 4
    # frames fully inside a, then fully inside b
    np.testing.assert_allclose(joined[:first.shape[0]], first, atol=1e-9)
    offset = (4 * n) // hop
    np.testing.assert_allclose(joined[offset:offset + second.shape[0] - 1], second[:-1], atol=1e-9)


def test_spectral_distance_identical_inputs_hit_floor():
    cfg = SpectralConfig(scales=(512, 256, 128))
    x = np.random.default_rng(1).standard_normal(4096)
    for _, frobenius, _ in spectral_terms(x, x, cfg):
        assert frobenius == 0.0
    assert spectral_distance(x, x, cfg) == pytest.approx(3 * math.log(cfg.epsilon))
    assert spectral_floor(cfg) == pytest.approx(3 * math.log(cfg.epsilon))
    logger.info("✅ Identical inputs give the floor value")


def test_spectral_distance_sign_flip_invariant():
    cfg = SpectralConfig(scales=(256, 128))
    rng = np.random.default_rng(2)
    x = rng.standard_normal(2048)
    y = rng.standard_normal(2048)
    assert spectral_distance(x, y, cfg) == pytest.approx(spectral_distance(x, -y, cfg), rel=1e-12)
    assert spectral_distance(x, -x, cfg) == pytest.approx(spectral_distance(x, x, cfg), rel=1e-12)


def test_spectral_distance_shift_by_one_hop():
    cfg = SpectralConfig(scales=(128,))
    hop = cfg.scales[-1] // 4
    rng = np.random.default_rng(3)
    x = np.zeros(8192)
    y = np.zeros(8192)
    x[512:-512] = rng.standard_normal(8192 - 1024)
    y[512:-512] = rng.standard_normal(8192 - 1024)
    shifted = spectral_distance(np.roll(x, hop), np.roll(y, hop), cfg)
    assert shifted == pytest.approx(spectral_distance(x, y, cfg), rel=1e-3)


def test_spectral_distance_matches_straight_recomputation():
    rate = 16000
    t = np.arange(rate) / rate
    x = np.sin(2 * np.pi * 440 * t)
    y = np.sin(2 * np.pi * 880 * t)
    cfg = SpectralConfig(scales=(2048, 1024, 512))

    expected = 0.0
    for n in cfg.scales:
        hop = n // 4
        frames = -(-(len(x) - n) // hop) + 1
        padded = (frames - 1) * hop + n
        window = np.hanning(n + 1)[:-1]

        def amplitude(signal):
            s = np.pad(signal, (0, padded - len(signal)))
            rows = [np.abs(np.fft.rfft(s[i * hop:i * hop + n] * window)) for i in range(frames)]
            return np.array(rows)

        sx, sy = amplitude(x), amplitude(y)
        expected += np.sqrt(np.sum((sx - sy) ** 2)) / (np.sqrt(np.sum(sx ** 2)) + cfg.epsilon)
        expected += np.log(np.sum(np.abs(sx - sy)) + cfg.epsilon)

    assert spectral_distance(x, y, cfg) == pytest.approx(expected, rel=1e-6)
    logger.info("✅ Spectral distance matches an independent recomputation")


def test_spectral_distance_length_mismatch():
    with pytest.raises(ShapeError):
        spectral_distance(np.zeros(512), np.zeros(256), SpectralConfig(scales=(128,)))


def test_spectral_config_rejects_bad_scales():
    with pytest.raises(ValueError):
        SpectralConfig(scales=(100,))
    with pytest.raises(ValueError):
        SpectralConfig(scales=(16,))
    low = SpectralConfig.for_sample_rate(16000)
    assert all(n >= 32 for n in low.scales)
    assert max(low.scales) < 2048


def test_kl_closed_forms():
    q = DiagonalGaussian(np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, math.log(4.0)]))
    kl = kl_diag_gaussian(q)
    assert kl[0] == pytest.approx(0.0)
    assert kl[1] == pytest.approx(0.5)
    assert kl[2] == pytest.approx(0.5 * (4.0 - math.log(4.0) - 1.0), abs=1e-4)
    assert kl[2] == pytest.approx(0.8069, abs=1e-4)

    rng = np.random.default_rng(0)
    random_q = DiagonalGaussian(rng.standard_normal(100), rng.standard_normal(100))
    assert np.all(kl_diag_gaussian(random_q) >= 0.0)
    logger.info("✅ KL closed forms")


def test_gaussian_rejects_bad_parameters():
    with pytest.raises(ShapeError):
        DiagonalGaussian(np.zeros(3), np.zeros(4))
    with pytest.raises(DataError):
        DiagonalGaussian(np.array([np.nan]), np.zeros(1))


def test_reparameterize_examples():
    mu = np.array([0.3, -1.2])
    q = DiagonalGaussian(mu, np.full(2, -40.0))
    np.testing.assert_allclose(reparameterize(q, np.array([1.0, -1.0])), mu, atol=1e-8)
    np.testing.assert_array_equal(reparameterize(DiagonalGaussian(mu, np.zeros(2)), np.zeros(2)), mu)
    z = reparameterize(DiagonalGaussian(np.zeros(2), np.zeros(2)), np.array([1.0, -1.0]))
    np.testing.assert_array_equal(z, [1.0, -1.0])
    with pytest.raises(ShapeError):
        reparameterize(q, np.zeros(3))


def test_dequantize_bounds_and_determinism():
    x = Waveform(np.zeros(10000), 16000)
    y = dequantize(x, 16, np.random.default_rng(5))
    assert np.all(np.abs(y.samples) <= 2.0 ** -16)
    again = dequantize(x, 16, np.random.default_rng(5))
    np.testing.assert_array_equal(y.samples, again.samples)
    with pytest.raises(ConfigurationError):
        dequantize(x, 4, np.random.default_rng(0))


def test_dequantize_noise_mean():
    bits = 8
    q = 2.0 ** (1 - bits)
    x = Waveform(np.zeros(1_000_000), 16000)
    y = dequantize(x, bits, np.random.default_rng(11))
    assert abs(np.mean(y.samples)) < 5 * q / math.sqrt(12 * 1_000_000)


def test_allpass_zero_coefficients_delay():
    x = Waveform(np.random.default_rng(0).standard_normal(100), 8000)
    y = random_allpass(x, np.random.default_rng(0), coefficients=[0.0] * 4)
    np.testing.assert_allclose(y.samples[4:], x.samples[:-4])
    np.testing.assert_allclose(y.samples[:4], 0.0)
    assert len(y) == len(x)


def test_allpass_preserves_sine_rms():
    rate = 16000
    t = np.arange(4 * rate) / rate
    x = Waveform(np.sin(2 * np.pi * 300 * t), rate)
    y = random_allpass(x, np.random.default_rng(7))
    centre = slice(rate, 3 * rate)
    ratio = np.sqrt(np.mean(y.samples[centre] ** 2)) / np.sqrt(np.mean(x.samples[centre] ** 2))
    assert abs(ratio - 1.0) < 0.01
    logger.info("✅ Allpass keeps steady-state amplitude")


def test_allpass_keeps_white_noise_spectrum():
    rate = 16000
    x = Waveform(np.random.default_rng(9).standard_normal(1 << 18), rate)
    y = random_allpass(x, np.random.default_rng(10))
    _, pxx = welch(x.samples, fs=rate, nperseg=256)
    _, pyy = welch(y.samples, fs=rate, nperseg=256)
    bands_x = np.array([chunk.mean() for chunk in np.array_split(pxx[1:], 8)])
    bands_y = np.array([chunk.mean() for chunk in np.array_split(pyy[1:], 8)])
    deviation_db = np.abs(10.0 * np.log10(bands_y / bands_x))
    assert np.all(deviation_db < 0.5)
    logger.info(f"✅ Allpass spectrum deviation at most {deviation_db.max():.3f} dB")


def test_random_crop_contracts():
    x = Waveform(np.arange(1000, dtype=np.float64), 8000)
    same = random_crop(Waveform(np.arange(100.0), 8000), 100, np.random.default_rng(0))
    np.testing.assert_array_equal(same.samples, np.arange(100.0))

    a = random_crop(x, 100, np.random.default_rng(9))
    b = random_crop(x, 100, np.random.default_rng(9))
    np.testing.assert_array_equal(a.samples, b.samples)
    assert len(a) == 100
    assert np.all(np.diff(a.samples) == 1.0)

    with pytest.raises(DataError):
        random_crop(Waveform(np.zeros(50), 8000), 100, np.random.default_rng(0))


def test_random_crop_offsets_uniform():
    from scipy.stats import chisquare

    x = Waveform(np.arange(1000, dtype=np.float64), 8000)
    rng = np.random.default_rng(21)
    offsets = np.array([int(random_crop(x, 100, rng).samples[0]) for _ in range(10000)])
    assert offsets.min() >= 0 and offsets.max() <= 900
    counts, _ = np.histogram(offsets, bins=10, range=(0, 901))
    assert chisquare(counts).pvalue > 0.001


def test_waveform_invariants():
    with pytest.raises(DataError):
        Waveform(np.array([0.0, np.inf]), 16000)
    with pytest.raises(ConfigurationError):
        Waveform(np.zeros(4), 0)
    with pytest.raises(ShapeError):
        Waveform(np.zeros((2, 4)), 16000)
