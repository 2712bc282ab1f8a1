"""
Realtime Audio VAE - Training Module
Two-stage spectral ELBO then adversarial fine-tuning
"""

from .config import TrainConfig
from .data import AudioDataset, BatchPrefetcher
from .losses import (
    spectral_loss, kl_loss, beta_schedule, hinge_discriminator,
    hinge_generator, generator_objective, discriminator_accuracy
)
from .trainer import (
    StepReport, TrainState, TrainResult, Trainer, METRIC_COLUMNS,
    stage1_step, stage2_discriminator_step, stage2_generator_step,
    run_training, evaluate_spectral, rank_probe, plateaued
)

__all__ = [
    'TrainConfig',
    'AudioDataset',
    'BatchPrefetcher',
    'spectral_loss',
    'kl_loss',
    'beta_schedule',
    'hinge_discriminator',
    'hinge_generator',
    'generator_objective',
    'discriminator_accuracy',
    'StepReport',
    'TrainState',
    'TrainResult',
    'Trainer',
    'METRIC_COLUMNS',
    'stage1_step',
    'stage2_discriminator_step',
    'stage2_generator_step',
    'run_training',
    'evaluate_spectral',
    'rank_probe',
    'plateaued'
]
