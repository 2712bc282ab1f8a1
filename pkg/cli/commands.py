"""
CLI Commands
One function per verb; each prints a short human-readable summary to stdout
"""

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from autograd.tensor import no_grad
from core.exceptions import ConfigurationError, DataError, ShapeError
from core.seeding import STREAM_PROBE, derive_rng
from dsp.signal import Waveform
from latent.analysis import (
    collect_latents, fit_basis, frames_to_rows, kl_per_dimension_report,
    project, reconstruct, rows_to_frames, CompactLatent
)
from latent.sweep import DEFAULT_FIDELITIES, fidelity_sweep
from model.rave import RaveModel
from runtime.bench import DEFAULT_TRIALS, BenchReport, bench_throughput
from runtime.transfer import TransferResult, timbre_transfer
from train.data import AudioDataset
from train.trainer import TrainResult, run_training
from .checkpoint import capture, load_checkpoint, restore_model, restore_state, save_checkpoint
from .config_file import RunConfig, load_config
from .corpus import CorpusSpec, generate_corpus, load_wav_folder, write_corpus
from .latent_file import LatentFile, frame_rate_mhz, read_latent_file, write_latent_file
from .wavio import read_wav, write_wav

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def load_dataset(run: RunConfig) -> AudioDataset:
    """WAV folder from data.path, or the synthetic corpus when data.synthetic is set"""
    if run.data.path:
        return load_wav_folder(run.data.path, run.data.max_clips)
    if run.data.synthetic:
        clips = generate_corpus(run.corpus)
        if run.data.max_clips is not None:
            clips = clips[:run.data.max_clips]
        return AudioDataset(clips)
    raise ConfigurationError("Set data.path or data.synthetic = true", keys=["data.path", "data.synthetic"])


def split_validation(dataset: AudioDataset, count: int, length: int) -> Tuple[AudioDataset, Optional[np.ndarray]]:
    """Hold out the last `count` clips; their first `length` samples form the validation batch"""
    if count == 0:
        return dataset, None
    if count >= len(dataset):
        raise DataError(f"Cannot hold out {count} of {len(dataset)} clips")
    held = [clip for clip in dataset.clips[-count:] if len(clip) >= length]
    if not held:
        raise DataError(f"No held-out clip holds {length} samples")
    train = AudioDataset(dataset.clips[:-count], dataset.names[:-count])
    return train, np.stack([clip.samples[:length] for clip in held])


def _encode_modes(model: RaveModel, x: Waveform) -> np.ndarray:
    if x.sample_rate != model.cfg.sample_rate:
        raise DataError(f"Input is {x.sample_rate} Hz but the model runs at {model.cfg.sample_rate} Hz")
    factor = model.cfg.total_downsampling
    samples = x.samples
    if samples.size % factor:
        samples = np.concatenate([samples, np.zeros(factor - samples.size % factor)])
    if samples.size == 0:
        raise DataError("Input clip is empty")
    model.eval()
    with no_grad():
        return np.array(model.encode(samples[None, :]).mean.data)


def cmd_train(config_path: PathLike, resume: Optional[PathLike] = None, seed: Optional[int] = None) -> TrainResult:
    run = load_config(config_path)
    if seed is not None:
        run = run.with_seed(seed)
    dataset, validation = split_validation(load_dataset(run), run.data.validation_clips, run.train.n_signal)
    output = run.output

    if resume is not None:
        checkpoint = load_checkpoint(resume)
        model = restore_model(checkpoint)
        state = restore_state(checkpoint, model, run.train)
        logger.info(f"Resuming from {resume} at step {state.step}")
    else:
        model, state = RaveModel(run.model), None
        if output.metrics_path.exists():
            logger.info(f"Starting fresh; removing previous metrics log {output.metrics_path}")
            output.metrics_path.unlink()

    def on_checkpoint(trainer) -> None:
        save_checkpoint(output.checkpoint_path, capture(trainer.model, run.train, trainer.state))

    result = run_training(
        dataset, run.train, model,
        output_dir=Path(output.dir), validation=validation,
        on_checkpoint=on_checkpoint, state=state
    )
    print(f"Trained {result.state.step} steps (stage {result.state.stage}); checkpoint {output.checkpoint_path}")
    if result.validation_spectral is not None:
        before, after = result.validation_spectral
        print(f"Validation spectral distance: {before:.4f} -> {after:.4f}")
    return result


def cmd_encode(checkpoint_path: PathLike, wav_path: PathLike, out_path: PathLike, fidelity: Optional[float] = None) -> LatentFile:
    checkpoint = load_checkpoint(checkpoint_path)
    model = restore_model(checkpoint)
    modes = _encode_modes(model, read_wav(wav_path))
    cfg = model.cfg

    if fidelity is None:
        latent = LatentFile(modes[0], frame_rate_mhz(cfg.latent_rate), cfg.latent_dim)
    else:
        basis = checkpoint.basis
        if basis is None:
            raise ConfigurationError("Checkpoint has no latent basis; run analyze first", keys=["fidelity"])
        rank = basis.rank(fidelity)
        compact = project(frames_to_rows(modes), basis, rank, fidelity)
        latent = LatentFile(compact.values.T, frame_rate_mhz(cfg.latent_rate), cfg.latent_dim, True, fidelity)
    write_latent_file(out_path, latent)

    ratio = cfg.total_downsampling / latent.dim
    print(
        f"Encoded {latent.frames} frames of dimension {latent.dim} at {cfg.latent_rate:.2f} Hz; "
        f"compression ratio {ratio:.1f} samples per latent value"
    )
    return latent


def cmd_decode(
    checkpoint_path: PathLike,
    latent_path: PathLike,
    out_path: PathLike,
    wav_format: str = "pcm16",
    seed: int = 0
) -> Waveform:
    checkpoint = load_checkpoint(checkpoint_path)
    model = restore_model(checkpoint)
    latent = read_latent_file(latent_path)
    if latent.full_dim != model.cfg.latent_dim:
        raise ShapeError("Latent file dimension differs from the model", expected=model.cfg.latent_dim, actual=latent.full_dim)

    if latent.compact:
        basis = checkpoint.basis
        if basis is None:
            raise ConfigurationError("Compact latent needs a checkpoint with a latent basis")
        compact = CompactLatent(latent.values.T.astype(np.float64), latent.dim, latent.fidelity)
        rows = reconstruct(compact, basis, derive_rng(seed, STREAM_PROBE, 3))
        values = rows_to_frames(rows, 1)
    else:
        if latent.dim != model.cfg.latent_dim:
            raise ShapeError("Latent dimension differs from the model", expected=model.cfg.latent_dim, actual=latent.dim)
        values = latent.values[None]

    model.eval()
    with no_grad():
        audio = model.decode(values.astype(np.float32)).data[0, 0]
    waveform = Waveform(np.clip(audio.astype(np.float64), -1.0, 1.0), model.cfg.sample_rate)
    write_wav(out_path, waveform, wav_format)
    print(f"Decoded {latent.frames} frames to {len(waveform)} samples ({waveform.duration:.2f} s)")
    return waveform


def cmd_analyze(
    checkpoint_path: PathLike,
    dataset_path: PathLike,
    fidelities: Sequence[float] = DEFAULT_FIDELITIES,
    out_csv: Optional[PathLike] = None,
    max_samples: int = 4096,
    seed: int = 0,
    sweep: bool = True
) -> pd.DataFrame:
    """Fit the latent basis, report ranks, reconstruction distances and per-dimension KL, store the basis"""
    checkpoint = load_checkpoint(checkpoint_path)
    model = restore_model(checkpoint)
    dataset = load_wav_folder(dataset_path)

    basis = fit_basis(collect_latents(model, dataset.clips, max_samples=max_samples, seed=seed))
    if sweep:
        table = fidelity_sweep(model, dataset.clips, basis, sorted(fidelities), seed=seed)
    else:
        table = pd.DataFrame({"fidelity": sorted(fidelities), "rank": [basis.rank(f) for f in sorted(fidelities)]})
    report = kl_per_dimension_report(model, dataset.clips)

    out_csv = Path(out_csv) if out_csv is not None else Path(checkpoint_path).with_suffix(".fidelity.csv")
    kl_csv = out_csv.with_name(out_csv.stem + ".kl.csv")
    try:
        table.to_csv(out_csv, index=False)
        pd.DataFrame({
            "dimension": report.order,
            "mean_kl": report.sorted_values
        }).to_csv(kl_csv, index=False)
    except OSError as e:
        raise DataError(f"Cannot write analysis tables: {e}", path=str(out_csv)) from e
    save_checkpoint(checkpoint_path, checkpoint.with_basis(basis))

    print(table.to_string(index=False))
    counts = report.counts()
    print(f"Dimensions with KL > 0.01: {counts[0.01]}, > 0.1: {counts[0.1]} of {model.cfg.latent_dim}")
    return table


def cmd_transfer(
    checkpoint_path: PathLike,
    wav_path: PathLike,
    out_path: PathLike,
    reference: Optional[PathLike] = None,
    wav_format: str = "pcm16"
) -> TransferResult:
    model = restore_model(load_checkpoint(checkpoint_path))
    result = timbre_transfer(model, read_wav(wav_path), read_wav(reference) if reference else None)
    write_wav(out_path, result.output, wav_format)
    print(f"Mean KL of input: {result.mean_kl:.4f}")
    if result.reference_kl is not None:
        print(f"Mean KL of in-domain reference: {result.reference_kl:.4f}")
    return result


def cmd_bench(
    checkpoint_path: PathLike,
    modes: Sequence[str] = ("full",),
    trials: int = DEFAULT_TRIALS,
    out_csv: Optional[PathLike] = None,
    seed: int = 0
) -> List[BenchReport]:
    """Benchmark each mode; the CSV holds one row per trial plus a summary row per mode"""
    model = restore_model(load_checkpoint(checkpoint_path))
    reports = [bench_throughput(model, mode, trials=trials, seed=seed) for mode in modes]

    frames = []
    for report in reports:
        per_trial = report.to_frame()
        summary = per_trial.iloc[[0]].copy()
        summary["trial"] = "summary"
        summary["seconds"] = report.mean_time
        frames.append(pd.concat([per_trial.astype({"trial": object}), summary], ignore_index=True))
    table = pd.concat(frames, ignore_index=True)
    if out_csv is not None:
        try:
            table.to_csv(out_csv, index=False)
        except OSError as e:
            raise DataError(f"Cannot write benchmark table: {e}", path=str(out_csv)) from e

    for report in reports:
        print(report.describe())
    if len(reports) == 2:
        print(f"Speedup {reports[0].mode} over {reports[1].mode}: {reports[0].samples_per_second / reports[1].samples_per_second:.2f}x")
    return reports


def cmd_synth_corpus(spec_path: Optional[PathLike], out_dir: PathLike, seed: Optional[int] = None) -> Path:
    """Corpus from a config file's corpus.* keys (defaults when no file is given)"""
    spec = load_config(spec_path).corpus if spec_path is not None else CorpusSpec()
    if seed is not None:
        spec = spec.model_copy(update={"seed": seed})
    path = write_corpus(spec, out_dir)
    print(f"Wrote {spec.n_clips} clips of {spec.samples_per_clip} samples to {path}")
    return path
