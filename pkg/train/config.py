"""
Training Configuration
Schedule, optimizer, loss weights and augmentation settings for the two-stage procedure
"""

from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator


class TrainConfig(BaseModel):
    """Two-stage training settings; step counts of 0 skip a stage"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    # Schedule
    stage1_steps: int = Field(default=2000, ge=0)
    stage2_steps: int = Field(default=500, ge=0)
    beta: float = Field(default=0.1, ge=0.0)
    beta_warmup_steps: Optional[int] = Field(default=None, ge=0)
    freeze_encoder_stage2: bool = True

    # Optimization
    batch_size: int = Field(default=8, ge=2)
    n_signal: int = Field(default=8192, ge=1)
    lr: float = Field(default=1e-4, gt=0.0)
    adam_betas: Tuple[float, float] = (0.5, 0.9)
    seed: int = 0

    # Loss weights: spectral, feature matching, adversarial
    loss_weights: Tuple[float, float, float] = (1.0, 10.0, 1.0)

    # Augmentation
    dequantize_bits: int = Field(default=16, ge=0, le=24)
    allpass: bool = True

    # Bookkeeping
    log_every: int = Field(default=50, ge=1)
    checkpoint_every: int = Field(default=0, ge=0)
    probe_every: int = Field(default=0, ge=0)
    probe_fidelity: float = Field(default=0.99, ge=0.0, le=1.0)
    history_size: int = Field(default=100, ge=1)
    plateau_window: int = Field(default=0, ge=0)
    plateau_tolerance: float = Field(default=1e-3, ge=0.0)
    prefetch: int = Field(default=4, ge=0)

    @field_validator("adam_betas")
    @classmethod
    def _check_betas(cls, betas: Tuple[float, float]) -> Tuple[float, float]:
        if not all(0.0 <= b < 1.0 for b in betas):
            raise ValueError(f"Adam betas must lie in [0, 1), got {betas}")
        return betas

    @field_validator("dequantize_bits")
    @classmethod
    def _check_bits(cls, bits: int) -> int:
        if bits and not 8 <= bits <= 24:
            raise ValueError(f"dequantize_bits must be 0 (off) or in [8, 24], got {bits}")
        return bits

    @property
    def warmup_steps(self) -> int:
        """KL warmup length; defaults to the first 10% of stage 1"""
        if self.beta_warmup_steps is not None:
            return self.beta_warmup_steps
        return self.stage1_steps // 10

    @property
    def total_steps(self) -> int:
        return self.stage1_steps + self.stage2_steps
