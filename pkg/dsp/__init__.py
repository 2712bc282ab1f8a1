"""
Realtime Audio VAE - Signal Processing
STFT amplitude, multiscale spectral distance, Gaussian helpers and augmentations
"""

from .signal import (
    Waveform, SpectralConfig, AmplitudeSpectrogram,
    stft_amplitude, spectral_distance, spectral_terms, spectral_floor
)
from .gaussian import DiagonalGaussian, kl_diag_gaussian, reparameterize
from .augment import dequantize, random_allpass, random_crop

__all__ = [
    'Waveform',
    'SpectralConfig',
    'AmplitudeSpectrogram',
    'stft_amplitude',
    'spectral_distance',
    'spectral_terms',
    'spectral_floor',
    'DiagonalGaussian',
    'kl_diag_gaussian',
    'reparameterize',
    'dequantize',
    'random_allpass',
    'random_crop'
]
