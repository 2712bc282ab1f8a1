"""
Two-Stage Trainer
Stage 1 learns the representation with a spectral ELBO, stage 2 fine-tunes
the decoder adversarially against the multiscale discriminator
"""

import json
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Deque, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from autograd.optim import Adam
from autograd.tensor import ComputeGraph, Tensor, backward, no_grad
from core.exceptions import ConfigurationError, DataError, NumericError, RaveError
from core.seeding import STREAM_LATENT, STREAM_NOISE, derive_rng
from dsp.gaussian import DiagonalGaussian, kl_diag_gaussian, reparameterize
from dsp.signal import SpectralConfig, spectral_distance
from latent.analysis import collect_latents, fit_basis
from model.discriminator import feature_matching
from model.rave import RaveModel
from .config import TrainConfig
from .data import AudioDataset, BatchPrefetcher
from .losses import (
    beta_schedule, discriminator_accuracy, generator_objective, hinge_discriminator,
    hinge_generator, kl_loss, spectral_loss
)

logger = logging.getLogger(__name__)

METRIC_COLUMNS = [
    "step", "stage", "spectral", "kl", "beta", "loss_dis",
    "loss_gen", "loss_fm", "disc_accuracy", "rank_probe"
]


@dataclass
class StepReport:
    """Loss components of one optimizer step; NaN marks a component the stage does not compute"""
    step: int
    stage: int
    spectral: float = math.nan
    kl: float = math.nan
    beta: float = math.nan
    loss_dis: float = math.nan
    loss_gen: float = math.nan
    loss_fm: float = math.nan
    disc_accuracy: float = math.nan
    rank_probe: float = math.nan

    def merge(self, other: "StepReport") -> "StepReport":
        """Fill this report's missing components from another one"""
        for name in METRIC_COLUMNS[2:]:
            if math.isnan(getattr(self, name)):
                setattr(self, name, getattr(other, name))
        return self

    def as_row(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_COLUMNS}

    def describe(self) -> str:
        parts = [f"step={self.step}", f"stage={self.stage}"]
        for name in METRIC_COLUMNS[2:]:
            value = getattr(self, name)
            if not math.isnan(value):
                parts.append(f"{name}={value:.4f}")
        return " ".join(parts)


@dataclass
class TrainState:
    """
    Everything a resumed run needs besides the model weights

    - step counts optimizer iterations across both stages
    - stage switches from 1 to 2 exactly once
    - one Adam state per sub-network
    """
    encoder_optimizer: Adam
    decoder_optimizer: Adam
    discriminator_optimizer: Adam
    spectral: SpectralConfig
    step: int = 0
    stage: int = 1
    stage2_start: Optional[int] = None
    history: Deque[StepReport] = field(default_factory=deque)

    @classmethod
    def create(cls, model: RaveModel, cfg: TrainConfig, spectral: Optional[SpectralConfig] = None) -> "TrainState":
        def adam(params):
            return Adam(params, lr=cfg.lr, betas=cfg.adam_betas)

        state = cls(
            encoder_optimizer=adam(model.encoder.parameters()),
            decoder_optimizer=adam(model.decoder.parameters()),
            discriminator_optimizer=adam(model.discriminator.parameters()),
            spectral=spectral or SpectralConfig.for_sample_rate(model.cfg.sample_rate),
            history=deque(maxlen=cfg.history_size)
        )
        if cfg.stage1_steps == 0:
            state.switch_stage()
        return state

    @property
    def optimizers(self) -> Dict[str, Adam]:
        return {
            "encoder": self.encoder_optimizer,
            "decoder": self.decoder_optimizer,
            "discriminator": self.discriminator_optimizer
        }

    def switch_stage(self) -> None:
        if self.stage != 1:
            raise ConfigurationError("Training already switched to the adversarial stage")
        self.stage = 2
        self.stage2_start = self.step

    def record(self, report: StepReport) -> None:
        self.history.append(report)

    def snapshot(self, model: RaveModel) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
        """Copies of model, buffer and optimizer arrays plus scalar metadata"""
        arrays = {f"model.{name}": np.array(value, copy=True) for name, value in model.state_dict().items()}
        for name, optimizer in self.optimizers.items():
            arrays.update({k: np.array(v, copy=True) for k, v in optimizer.state_dict(f"optim.{name}").items()})
        if self.history:
            arrays["train.history"] = np.array(
                [[getattr(r, c) for c in METRIC_COLUMNS] for r in self.history], dtype=np.float64
            )
        meta = {
            "step": self.step,
            "stage": self.stage,
            "stage2_start": self.stage2_start,
            "optimizer_steps": {name: opt.state.step for name, opt in self.optimizers.items()}
        }
        return arrays, meta

    def restore(self, model: RaveModel, arrays: Dict[str, np.ndarray], meta: Dict[str, Any]) -> None:
        model.load_state_dict({k[len("model."):]: v for k, v in arrays.items() if k.startswith("model.")})
        for name, optimizer in self.optimizers.items():
            optimizer.load_state_dict(arrays, f"optim.{name}", meta["optimizer_steps"][name])
        self.step = int(meta["step"])
        self.stage = int(meta["stage"])
        self.stage2_start = meta.get("stage2_start")
        self.history.clear()
        for row in arrays.get("train.history", np.zeros((0, len(METRIC_COLUMNS)))):
            values = dict(zip(METRIC_COLUMNS, row.tolist()))
            self.history.append(StepReport(
                step=int(values.pop("step")), stage=int(values.pop("stage")), **values
            ))
        logger.info(f"Restored training state at step {self.step} (stage {self.stage})")


def _require_stage(state: TrainState, stage: int, operation: str) -> None:
    if state.stage != stage:
        raise ConfigurationError(f"{operation} needs stage {stage}, training is in stage {state.stage}")


def _check_finite(values: Dict[str, float], state: TrainState) -> None:
    bad = {name: value for name, value in values.items() if not np.isfinite(value)}
    if bad:
        raise NumericError(
            f"Non-finite loss at step {state.step}: {sorted(bad)}",
            diagnostics={"step": state.step, "stage": state.stage, **{k: float(v) for k, v in values.items()}}
        )


def _posterior(model: RaveModel, batch: np.ndarray, state: TrainState) -> DiagonalGaussian:
    try:
        return model.encode(batch)
    except DataError as e:
        raise NumericError(
            f"Encoder produced non-finite posterior at step {state.step}",
            diagnostics={"step": state.step, "stage": state.stage}
        ) from e


def _sample_latent(q: DiagonalGaussian, cfg: TrainConfig, *counters: int) -> Tensor:
    noise = derive_rng(cfg.seed, STREAM_LATENT, *counters).standard_normal(q.mean.shape)
    return reparameterize(q, noise.astype(q.mean.dtype))


def _optimize(loss: Tensor, params: Sequence[Tensor], optimizers: Sequence[Adam]) -> None:
    graph = ComputeGraph.trace(loss)
    backward(graph, loss, parameters=params)
    for optimizer in optimizers:
        optimizer.step()


def stage1_step(model: RaveModel, batch: np.ndarray, cfg: TrainConfig, state: TrainState) -> StepReport:
    """Spectral ELBO update of encoder and decoder"""
    _require_stage(state, 1, "stage1_step")
    step = state.step
    model.train()
    model.zero_grad()

    q = _posterior(model, batch, state)
    z = _sample_latent(q, cfg, step)
    x_hat = model.decode(z, noise_rng=derive_rng(cfg.seed, STREAM_NOISE, step))
    spectral = spectral_loss(batch, x_hat, state.spectral)
    kl = kl_loss(q)
    beta_t = beta_schedule(step, cfg.beta, cfg.warmup_steps)
    loss = spectral + kl * beta_t if beta_t > 0.0 else spectral
    _check_finite({"spectral": spectral.item(), "kl": kl.item(), "loss": loss.item()}, state)

    _optimize(loss, model.generator_parameters(), [state.encoder_optimizer, state.decoder_optimizer])
    state.step += 1
    return StepReport(step=step, stage=1, spectral=spectral.item(), kl=kl.item(), beta=beta_t)


def _stage2_generation(model: RaveModel, batch: np.ndarray, cfg: TrainConfig, state: TrainState, phase: int, frozen: bool):
    """Posterior, sampled latent and reconstruction for one stage-2 phase"""
    step = state.step
    noise_rng = derive_rng(cfg.seed, STREAM_NOISE, step, phase)
    if frozen:
        model.encoder.eval()
        with no_grad():
            q = _posterior(model, batch, state)
            z = _sample_latent(q, cfg, step, phase)
    else:
        model.encoder.train()
        q = _posterior(model, batch, state)
        z = _sample_latent(q, cfg, step, phase)
    return q, z, noise_rng


def stage2_discriminator_step(model: RaveModel, batch: np.ndarray, cfg: TrainConfig, state: TrainState) -> StepReport:
    """Hinge update of the discriminator against a detached reconstruction

    The step counter advances on the generator step that follows. The encoder
    always runs in eval mode here so its batch-norm statistics only move on
    generator steps.
    """
    _require_stage(state, 2, "stage2_discriminator_step")
    model.train()
    model.zero_grad()

    with no_grad():
        _, z, noise_rng = _stage2_generation(model, batch, cfg, state, 1, frozen=True)
        x_hat = model.decode(z, noise_rng=noise_rng)
    if not cfg.freeze_encoder_stage2:
        model.encoder.train()
    real = model.discriminate(batch)
    fake = model.discriminate(x_hat.detach())
    loss = hinge_discriminator(real.logits, fake.logits)
    _check_finite({"loss_dis": loss.item()}, state)

    _optimize(loss, model.discriminator.parameters(), [state.discriminator_optimizer])
    return StepReport(
        step=state.step, stage=2, loss_dis=loss.item(),
        disc_accuracy=discriminator_accuracy(real.logits, fake.logits)
    )


def stage2_generator_step(model: RaveModel, batch: np.ndarray, cfg: TrainConfig, state: TrainState) -> StepReport:
    """Adversarial, spectral and feature-matching update of the decoder

    The encoder runs without gradient tracking when frozen; otherwise it is
    updated by the same objective.
    """
    _require_stage(state, 2, "stage2_generator_step")
    step = state.step
    model.train()
    model.zero_grad()
    frozen = cfg.freeze_encoder_stage2

    q, z, noise_rng = _stage2_generation(model, batch, cfg, state, 2, frozen)
    x_hat = model.decode(z, noise_rng=noise_rng)
    with no_grad():
        real = model.discriminate(batch)
    fake = model.discriminate(x_hat)

    adversarial = hinge_generator(fake.logits)
    spectral = spectral_loss(batch, x_hat, state.spectral)
    fm = feature_matching(real, fake)
    loss = generator_objective(adversarial, spectral, fm, cfg.loss_weights)
    kl_value = float(np.mean(np.sum(kl_diag_gaussian(DiagonalGaussian(q.mean.data, q.log_variance.data)), axis=1)))
    _check_finite({"loss_gen": adversarial.item(), "spectral": spectral.item(), "loss_fm": fm.item(), "loss": loss.item()}, state)

    if frozen:
        _optimize(loss, model.decoder.parameters(), [state.decoder_optimizer])
    else:
        _optimize(loss, model.generator_parameters(), [state.encoder_optimizer, state.decoder_optimizer])
    model.discriminator.zero_grad()
    state.step += 1
    return StepReport(
        step=step, stage=2, spectral=spectral.item(), kl=kl_value, beta=cfg.beta,
        loss_gen=adversarial.item(), loss_fm=fm.item()
    )


def evaluate_spectral(model: RaveModel, batch: np.ndarray, spectral: SpectralConfig) -> float:
    """Mean spectral distance of posterior-mean reconstructions, eval mode"""
    model.eval()
    with no_grad():
        q = model.encode(batch)
        x_hat = model.decode(q.mean).data
    distances = [spectral_distance(x, y, spectral) for x, y in zip(np.asarray(batch), x_hat[:, 0, :])]
    return float(np.mean(distances))


def rank_probe(model: RaveModel, batch: np.ndarray, fidelity: float) -> int:
    """Fidelity rank of the posterior modes on a fixed batch"""
    basis = fit_basis(collect_latents(model, list(np.asarray(batch))))
    return basis.rank(fidelity)


def plateaued(history: Sequence[StepReport], window: int, tolerance: float) -> bool:
    """True when the spectral loss moving average stopped improving by more than tolerance"""
    if window <= 0:
        return False
    values = [r.spectral for r in history if r.stage == 1 and not math.isnan(r.spectral)]
    if len(values) < 2 * window:
        return False
    previous = float(np.mean(values[-2 * window:-window]))
    recent = float(np.mean(values[-window:]))
    return previous - recent < tolerance * max(abs(previous), 1e-12)


class MetricsLog:
    """Step reports appended to a CSV file in batches"""

    def __init__(self, path: Optional[Path]):
        self.path = Path(path) if path is not None else None
        self.rows: List[Dict[str, float]] = []
        self.pending: List[Dict[str, float]] = []

    def append(self, report: StepReport) -> None:
        row = report.as_row()
        self.rows.append(row)
        self.pending.append(row)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=METRIC_COLUMNS)

    def flush(self) -> None:
        if self.path is None or not self.pending:
            return
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            pd.DataFrame(self.pending, columns=METRIC_COLUMNS).to_csv(
                self.path, mode="a", header=not self.path.exists(), index=False
            )
        except OSError as e:
            raise DataError(f"Cannot write metrics log: {e}", path=str(self.path)) from e
        self.pending.clear()


@dataclass
class TrainResult:
    state: TrainState
    metrics: pd.DataFrame
    validation_spectral: Optional[Tuple[float, float]] = None


class Trainer:
    """
    Runs the two-stage schedule for one model and dataset

    This is the training loop that:
    - consumes batches from a prefetch thread in step order
    - switches stage once, at stage1_steps or on an enabled plateau
    - logs, probes and asks registered handlers for checkpoints
    - dumps diagnostics and aborts on a non-finite loss
    """

    def __init__(
        self,
        model: RaveModel,
        dataset: AudioDataset,
        cfg: TrainConfig,
        output_dir: Optional[Path] = None,
        validation: Optional[np.ndarray] = None,
        run_name: str = "run",
        state: Optional[TrainState] = None
    ):
        self.model = model
        self.dataset = dataset.usable(cfg.n_signal)
        if self.dataset.sample_rate != model.cfg.sample_rate:
            raise DataError(
                f"Dataset sample rate {self.dataset.sample_rate} Hz differs from the model's {model.cfg.sample_rate} Hz"
            )
        model.check_length(cfg.n_signal)
        if cfg.stage2_steps and cfg.n_signal < model.cfg.discriminator_min_length:
            raise ConfigurationError(
                f"n_signal {cfg.n_signal} is shorter than the discriminator minimum "
                f"{model.cfg.discriminator_min_length}", keys=["train.n_signal"]
            )
        self.cfg = cfg
        self.output_dir = Path(output_dir) if output_dir is not None else None
        self.validation = validation
        self.state = state or TrainState.create(model, cfg)
        self.logger = logging.getLogger(f"train.{run_name}")
        self.metrics = MetricsLog(self.output_dir / "metrics.csv" if self.output_dir else None)

        # Bookkeeping
        self.stats = {
            "steps_run": 0,
            "stage1_steps_run": 0,
            "stage2_steps_run": 0,
            "probes_run": 0,
            "checkpoints_requested": 0,
            "started_at": None,
            "finished_at": None
        }

        # Event handlers
        self.event_handlers: Dict[str, List[Callable]] = {
            "step_completed": [],
            "stage_switched": [],
            "checkpoint_due": [],
            "training_completed": []
        }

    def add_event_handler(self, event: str, handler: Callable) -> None:
        if event not in self.event_handlers:
            raise ConfigurationError(f"Unknown training event: {event}")
        self.event_handlers[event].append(handler)

    def _trigger_event(self, event: str, *args) -> None:
        for handler in self.event_handlers[event]:
            handler(self, *args)

    def _stage2_end(self) -> int:
        start = self.state.stage2_start if self.state.stage2_start is not None else self.cfg.stage1_steps
        return start + self.cfg.stage2_steps

    def _dump_diagnostics(self, error: NumericError) -> None:
        self.logger.error(f"Aborting: {error}")
        if self.output_dir is None:
            return
        path = self.output_dir / "nan_diagnostics.json"
        recent = [r.as_row() for r in list(self.state.history)[-10:]]
        payload = {"error": str(error), "diagnostics": error.diagnostics, "recent": recent}
        try:
            self.output_dir.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(payload, indent=2, default=str))
            self.logger.error(f"Diagnostics written to {path}")
        except OSError as e:
            self.logger.error(f"Could not write diagnostics to {path}: {e}")

    def _after_step(self, report: StepReport) -> None:
        state, cfg = self.state, self.cfg
        if cfg.probe_every and state.step % cfg.probe_every == 0:
            report.rank_probe = float(rank_probe(self.model, self.dataset.probe_batch(cfg), cfg.probe_fidelity))
            self.stats["probes_run"] += 1
        state.record(report)
        self.metrics.append(report)
        self.stats["steps_run"] += 1
        self.stats[f"stage{report.stage}_steps_run"] += 1
        if state.step % cfg.log_every == 0:
            self.logger.info(report.describe())
            self.metrics.flush()
        if cfg.checkpoint_every and state.step % cfg.checkpoint_every == 0:
            self.metrics.flush()
            self.stats["checkpoints_requested"] += 1
            self._trigger_event("checkpoint_due")
        self._trigger_event("step_completed", report)

    def _run_stage1(self) -> None:
        prefetcher = BatchPrefetcher(self.dataset, self.cfg, range(self.state.step, self.cfg.stage1_steps))
        try:
            for _, batch in prefetcher:
                self._after_step(stage1_step(self.model, batch, self.cfg, self.state))
                if plateaued(self.state.history, self.cfg.plateau_window, self.cfg.plateau_tolerance):
                    self.logger.info(f"Spectral loss plateaued at step {self.state.step}")
                    break
        finally:
            prefetcher.close()

    def _run_stage2(self) -> None:
        prefetcher = BatchPrefetcher(self.dataset, self.cfg, range(self.state.step, self._stage2_end()))
        try:
            for _, batch in prefetcher:
                dis = stage2_discriminator_step(self.model, batch, self.cfg, self.state)
                gen = stage2_generator_step(self.model, batch, self.cfg, self.state)
                self._after_step(gen.merge(dis))
        finally:
            prefetcher.close()

    def run(self) -> TrainResult:
        """Execute the remaining schedule from the current state"""
        self.stats["started_at"] = datetime.now().isoformat()
        before = None
        if self.validation is not None:
            before = evaluate_spectral(self.model, self.validation, self.state.spectral)
            self.logger.info(f"Validation spectral distance before training: {before:.4f}")
        try:
            if self.state.stage == 1:
                self._run_stage1()
                if self.cfg.stage2_steps:
                    self.state.switch_stage()
                    self.logger.info(f"Switched to adversarial fine-tuning at step {self.state.step}")
                    self._trigger_event("stage_switched")
            if self.state.stage == 2:
                self._run_stage2()
        except NumericError as e:
            self._dump_diagnostics(e)
            raise
        except RaveError:
            raise
        except Exception as e:
            self.logger.error(f"Training failed at step {self.state.step}: {e}")
            raise
        finally:
            self.metrics.flush()

        after = None
        if self.validation is not None:
            after = evaluate_spectral(self.model, self.validation, self.state.spectral)
            self.logger.info(f"Validation spectral distance after training: {after:.4f}")
        self.stats["finished_at"] = datetime.now().isoformat()
        self.logger.info(f"Training finished at step {self.state.step}: {self.stats['steps_run']} steps this run")
        self._trigger_event("training_completed")
        return TrainResult(
            state=self.state,
            metrics=self.metrics.frame(),
            validation_spectral=(before, after) if before is not None else None
        )


def run_training(
    dataset: AudioDataset,
    cfg: TrainConfig,
    model: RaveModel,
    output_dir: Optional[Path] = None,
    validation: Optional[np.ndarray] = None,
    on_checkpoint: Optional[Callable[["Trainer"], None]] = None,
    state: Optional[TrainState] = None
) -> TrainResult:
    """Train `model` on `dataset`; `on_checkpoint` runs every checkpoint_every steps and at the end"""
    if len(dataset) == 0:
        raise DataError("Training dataset is empty")
    trainer = Trainer(model, dataset, cfg, output_dir=output_dir, validation=validation, state=state)
    if on_checkpoint is not None:
        trainer.add_event_handler("checkpoint_due", on_checkpoint)
        trainer.add_event_handler("training_completed", on_checkpoint)
    return trainer.run()
