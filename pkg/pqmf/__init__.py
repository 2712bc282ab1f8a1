"""
Realtime Audio VAE - Multiband Decomposition
Kaiser prototype design and the pseudo-QMF analysis/synthesis bank
"""

from .prototype import PrototypeFilter, SearchConfig, design_prototype, default_taps
from .bank import (
    PqmfBank, MultibandSignal, modulate_bank, build_bank,
    analyze, synthesize, analyze_array, synthesize_array, delayed_snr
)

__all__ = [
    'PrototypeFilter',
    'SearchConfig',
    'design_prototype',
    'default_taps',
    'PqmfBank',
    'MultibandSignal',
    'modulate_bank',
    'build_bank',
    'analyze',
    'synthesize',
    'analyze_array',
    'synthesize_array',
    'delayed_snr'
]
