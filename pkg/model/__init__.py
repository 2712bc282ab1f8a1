"""
Realtime Audio VAE - Model Module
Encoder, three-headed decoder, noise synthesizer and multiscale discriminator
"""

from .config import ModelConfig, PRESETS
from .encoder import Encoder
from .decoder import Decoder
from .noise import NoiseHead, noise_synth, noise_filter_matrix
from .discriminator import Discriminator, DiscriminatorOutput, feature_matching
from .multiband import PqmfAnalysis, PqmfSynthesis
from .rave import RaveModel, LatentFrames

__all__ = [
    'ModelConfig',
    'PRESETS',
    'Encoder',
    'Decoder',
    'NoiseHead',
    'noise_synth',
    'noise_filter_matrix',
    'Discriminator',
    'DiscriminatorOutput',
    'feature_matching',
    'PqmfAnalysis',
    'PqmfSynthesis',
    'RaveModel',
    'LatentFrames'
]
