"""
Realtime Audio VAE - Latent Module
SVD compaction of the posterior modes with fidelity-controlled rank
"""

from .analysis import (
    LatentMatrix, FidelityBasis, CompactLatent, KLReport,
    latent_matrix, collect_latents, fit_basis, rank_for_fidelity,
    project, reconstruct, kl_report, kl_per_dimension_report
)
from .sweep import fidelity_sweep, compact_roundtrip

__all__ = [
    'LatentMatrix',
    'FidelityBasis',
    'CompactLatent',
    'KLReport',
    'latent_matrix',
    'collect_latents',
    'fit_basis',
    'rank_for_fidelity',
    'project',
    'reconstruct',
    'kl_report',
    'kl_per_dimension_report',
    'fidelity_sweep',
    'compact_roundtrip'
]
