#!/usr/bin/env python3
"""
CLI Tests
File formats, configuration parsing, synthetic corpus and the verb flows on a tiny model
"""

import json
import logging
import os
import sys

import numpy as np
import pandas as pd
import pytest
from scipy.io import wavfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from autograd.tensor import no_grad
from cli import (
    CorpusSpec, LatentFile, RunConfig, capture, dump_config, error_line, exit_code_for,
    generate_clip, generate_corpus, load_checkpoint, load_wav_folder, main, parse_config,
    read_latent_file, read_wav, restore_model, save_checkpoint, write_corpus,
    write_latent_file, write_wav
)
from cli import commands
from cli.checkpoint import decode_checkpoint, encode_checkpoint
from cli.latent_file import HEADER, frame_rate_mhz
from conftest import TINY_MODEL
from core.exceptions import (
    CheckpointError, ConfigurationError, DataError, NumericError, ShapeError, StatisticsError
)
from dsp.signal import Waveform
from latent import fit_basis, latent_matrix

# Set up logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def _config_text(out_dir, **extra) -> str:
    lines = ["preset = desk"]
    for key, value in TINY_MODEL.items():
        text = ", ".join(str(v) for v in value) if isinstance(value, tuple) else str(value)
        lines.append(f"model.{key} = {text}")
    lines += [
        "corpus.sample_rate = 8000",
        "corpus.f0_max = 1000",
        "corpus.n_clips = 4",
        "corpus.duration = 0.25",
        "data.synthetic = true",
        "train.batch_size = 2",
        "train.n_signal = 256",
        "train.stage1_steps = 2",
        "train.stage2_steps = 1",
        "train.beta_warmup_steps = 1",
        "train.log_every = 1",
        f"output.dir = {out_dir}",
    ]
    lines += [f"{key} = {value}" for key, value in extra.items()]
    return "\n".join(lines) + "\n"


@pytest.fixture
def checkpoint_path(tmp_path, tiny_model):
    return save_checkpoint(tmp_path / "tiny.rave", capture(tiny_model))


@pytest.fixture
def tone_folder(tmp_path, tone_clips):
    folder = tmp_path / "tones"
    for index, clip in enumerate(tone_clips):
        write_wav(folder / f"tone_{index}.wav", clip)
    return folder


# WAV files

def test_wav_pcm16_round_trip(tmp_path):
    samples = np.random.default_rng(0).uniform(-0.9, 0.9, 1000)
    path = write_wav(tmp_path / "a.wav", Waveform(samples, 8000))
    back = read_wav(path)
    assert back.sample_rate == 8000
    assert len(back) == 1000
    assert np.max(np.abs(back.samples - samples)) <= 2.0 ** -15


def test_wav_float32_round_trip(tmp_path):
    samples = np.random.default_rng(1).uniform(-1.0, 1.0, 500)
    back = read_wav(write_wav(tmp_path / "f.wav", Waveform(samples, 22050), "float32"))
    np.testing.assert_allclose(back.samples, samples.astype(np.float32), rtol=0, atol=1e-7)


def test_wav_rejections(tmp_path):
    with pytest.raises(DataError):
        read_wav(tmp_path / "missing.wav")

    stereo = tmp_path / "stereo.wav"
    wavfile.write(stereo, 8000, np.zeros((100, 2), dtype=np.int16))
    with pytest.raises(DataError):
        read_wav(stereo)

    wide = tmp_path / "int32.wav"
    wavfile.write(wide, 8000, np.zeros(100, dtype=np.int32))
    with pytest.raises(DataError):
        read_wav(wide)

    with pytest.raises(DataError):
        write_wav(tmp_path / "x.wav", Waveform(np.zeros(4), 8000), "mp3")


def test_pcm16_clips_full_scale(tmp_path):
    back = read_wav(write_wav(tmp_path / "loud.wav", Waveform(np.array([1.0, -1.0, 0.0]), 8000)))
    assert back.samples[0] == pytest.approx(1.0 - 2.0 ** -15)
    assert back.samples[1] == -1.0


# Latent files

def test_latent_file_round_trip(tmp_path):
    values = np.random.default_rng(2).standard_normal((3, 5)).astype(np.float32)
    latent = LatentFile(values, frame_rate_mhz(31.25), full_dim=8, compact=True, fidelity=0.9)
    assert HEADER.size == 28
    back = read_latent_file(write_latent_file(tmp_path / "z.ravl", latent))
    np.testing.assert_array_equal(back.values, values)
    assert back.frame_rate == pytest.approx(31.25)
    assert back.full_dim == 8 and back.compact
    assert back.fidelity == pytest.approx(0.9)


def test_latent_file_rejections():
    blob = LatentFile(np.zeros((2, 3)), 1000, 2).to_bytes()
    with pytest.raises(DataError):
        LatentFile.from_bytes(b"XXXX" + blob[4:])
    with pytest.raises(DataError):
        LatentFile.from_bytes(blob[:-1])
    with pytest.raises(DataError):
        LatentFile.from_bytes(blob[:10])
    with pytest.raises(DataError):
        LatentFile(np.zeros((1, 2, 3)), 1000, 2)


# Checkpoints

def test_checkpoint_restores_identical_model(checkpoint_path, tiny_model):
    restored = restore_model(load_checkpoint(checkpoint_path))
    assert restored.cfg == tiny_model.cfg
    np.testing.assert_array_equal(restored.bank.filters, tiny_model.bank.filters)

    z = np.random.default_rng(3).standard_normal((1, 4, 6))
    tiny_model.eval()
    restored.eval()
    with no_grad():
        np.testing.assert_array_equal(restored.decode(z).data, tiny_model.decode(z).data)
    logger.info("✅ Restored model decodes bit-identically")


def test_checkpoint_encoding_is_deterministic(tiny_model):
    checkpoint = capture(tiny_model)
    blob = encode_checkpoint(checkpoint)
    assert blob == encode_checkpoint(capture(tiny_model))
    assert blob.startswith(b"RAVE-CKPT 1 ")
    decoded = decode_checkpoint(blob)
    assert set(decoded.arrays) == set(checkpoint.arrays)
    assert not decoded.has_basis


def test_checkpoint_rejections(tmp_path, tiny_model):
    blob = encode_checkpoint(capture(tiny_model))
    with pytest.raises(CheckpointError):
        decode_checkpoint(b"no header at all")
    with pytest.raises(CheckpointError):
        decode_checkpoint(b"OTHER 1 2\n{}")
    with pytest.raises(CheckpointError):
        decode_checkpoint(blob.replace(b"RAVE-CKPT 1", b"RAVE-CKPT 9", 1))
    with pytest.raises(CheckpointError):
        decode_checkpoint(blob + b"\x00")
    with pytest.raises(CheckpointError):
        decode_checkpoint(blob[:-4])
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "absent.rave")


# Configuration

def test_parse_config_overrides(tmp_path):
    run = parse_config(_config_text(tmp_path))
    assert run.model.sample_rate == 8000
    assert run.model.encoder_hidden == (8, 8)
    assert run.model.pqmf_taps == 64
    assert run.train.stage1_steps == 2
    assert run.data.synthetic is True
    assert run.output.checkpoint_path == tmp_path / "checkpoint.rave"

    defaults = parse_config("")
    assert defaults == RunConfig()


def test_parse_config_reports_every_unknown_key():
    with pytest.raises(ConfigurationError) as info:
        parse_config("model.latent_dims = 8\nfoo = 1\ntrain.batch_size = 4\n")
    assert info.value.keys == ["model.latent_dims", "foo"]

    with pytest.raises(ConfigurationError) as info:
        parse_config("preset = huge\n")
    assert info.value.keys == ["preset"]


def test_parse_config_reports_invalid_values():
    with pytest.raises(ConfigurationError) as info:
        parse_config("train.batch_size = 1\nmodel.bands = 3\n")
    assert "train.batch_size" in info.value.keys
    with pytest.raises(ConfigurationError):
        parse_config("output.wav_format = mp3\n")


def test_parse_config_single_value_tuples():
    run = parse_config(
        "model.encoder_hidden = 64\nmodel.encoder_strides = 4\nmodel.noise_frame = 4\n"
        "model.residual_dilations = 1\ntrain.batch_size = 4\n"
    )
    assert run.model.encoder_hidden == (64,)
    assert run.model.encoder_strides == (4,)
    assert run.model.residual_dilations == (1,)
    assert run.train.batch_size == 4
    assert run.model.total_downsampling == run.model.bands * 4


def test_dump_config_round_trip(tmp_path):
    run = parse_config(_config_text(tmp_path, **{"corpus.harmonic_cap": "900", "train.allpass": "false"}))
    text = dump_config(run)
    assert parse_config(text) == run
    assert "model.encoder_strides = [2, 2]" in text


# Synthetic corpus

SMALL_CORPUS = dict(n_clips=3, duration=0.1, sample_rate=8000, f0_max=1000.0, noise_level=0.05)


def test_corpus_is_deterministic():
    spec = CorpusSpec(**SMALL_CORPUS)
    a = generate_clip(spec, 1)
    b = generate_clip(spec, 1)
    np.testing.assert_array_equal(a.samples, b.samples)
    assert np.max(np.abs(a.samples)) == pytest.approx(0.8)

    serial = generate_corpus(spec.model_copy(update={"workers": 1}))
    parallel = generate_corpus(spec.model_copy(update={"workers": 3}))
    for x, y in zip(serial, parallel):
        np.testing.assert_array_equal(x.samples, y.samples)

    assert spec.digest() == spec.model_copy(update={"workers": 7}).digest()
    assert spec.digest() != spec.model_copy(update={"seed": 1}).digest()


def test_corpus_validation():
    with pytest.raises(ValueError):
        CorpusSpec(sample_rate=8000, f0_max=4000.0)
    with pytest.raises(ValueError):
        CorpusSpec(min_partials=5, max_partials=2)
    with pytest.raises(ValueError):
        CorpusSpec(wav_format="mp3")


def test_write_corpus_manifest(tmp_path):
    spec = CorpusSpec(**SMALL_CORPUS)
    first = write_corpus(spec, tmp_path / "one")
    second = write_corpus(spec, tmp_path / "two")
    manifest = json.loads((first / "manifest.json").read_text())
    assert manifest["spec_sha256"] == spec.digest()
    assert sorted(manifest["files"]) == ["clip_0000.wav", "clip_0001.wav", "clip_0002.wav"]
    assert manifest["files"] == json.loads((second / "manifest.json").read_text())["files"]

    dataset = load_wav_folder(first)
    assert len(dataset) == 3
    assert dataset.names == ["clip_0000", "clip_0001", "clip_0002"]

    with pytest.raises(DataError):
        load_wav_folder(tmp_path / "nothing")
    (tmp_path / "empty").mkdir()
    with pytest.raises(DataError):
        load_wav_folder(tmp_path / "empty")


# Exit codes

def test_exit_codes_and_error_line():
    assert exit_code_for(ConfigurationError("x")) == 2
    assert exit_code_for(DataError("x")) == 3
    assert exit_code_for(CheckpointError("x")) == 3
    assert exit_code_for(ShapeError("x")) == 3
    assert exit_code_for(NumericError("x")) == 4
    assert exit_code_for(StatisticsError("x")) == 4
    assert exit_code_for(ValueError("x")) == 1

    assert error_line(DataError("bad\n  file")) == "error=DataError code=data message=bad file"
    assert error_line(ValueError("oops")) == "error=ValueError code=internal message=oops"


def test_main_reports_failures(tmp_path, capsys):
    code = main(["decode", str(tmp_path / "absent.rave"), str(tmp_path / "z.ravl"), str(tmp_path / "o.wav")])
    assert code == 3
    assert capsys.readouterr().err.startswith("error=CheckpointError code=checkpoint")

    config = tmp_path / "bad.cfg"
    config.write_text("train.steps = 10\n")
    assert main(["train", str(config)]) == 2
    assert "train.steps" in capsys.readouterr().err

    assert main(["--log-level", "loud", "synth-corpus", str(tmp_path / "c")]) == 2


def test_main_synth_corpus(tmp_path, capsys):
    config = tmp_path / "corpus.cfg"
    config.write_text("corpus.n_clips = 2\ncorpus.duration = 0.05\ncorpus.sample_rate = 8000\ncorpus.f0_max = 1000\n")
    assert main(["synth-corpus", str(config), str(tmp_path / "out"), "--seed", "5"]) == 0
    assert "Wrote 2 clips of 400 samples" in capsys.readouterr().out
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["spec"]["seed"] == 5


# Verb flows

def test_encode_decode_flow(tmp_path, checkpoint_path, tone_clips):
    wav = write_wav(tmp_path / "in.wav", tone_clips[0])
    latent = commands.cmd_encode(checkpoint_path, wav, tmp_path / "z.ravl")
    assert latent.dim == 4 and latent.frames == 256 and not latent.compact
    assert latent.frame_rate == pytest.approx(1000.0)

    out = commands.cmd_decode(checkpoint_path, tmp_path / "z.ravl", tmp_path / "out.wav", seed=1)
    assert len(out) == 2048
    assert read_wav(tmp_path / "out.wav").sample_rate == 8000

    with pytest.raises(ConfigurationError):
        commands.cmd_encode(checkpoint_path, wav, tmp_path / "c.ravl", fidelity=0.9)

    fast = write_wav(tmp_path / "fast.wav", Waveform(tone_clips[0].samples, 16000))
    with pytest.raises(DataError):
        commands.cmd_encode(checkpoint_path, fast, tmp_path / "f.ravl")


def test_analyze_then_compact_codes(tmp_path, checkpoint_path, tone_folder, tone_clips):
    table = commands.cmd_analyze(checkpoint_path, tone_folder, (0.5, 0.9, 1.0), out_csv=tmp_path / "fid.csv")
    assert list(table["rank"]) == sorted(table["rank"])
    assert pd.read_csv(tmp_path / "fid.csv").shape[0] == 3
    kl = pd.read_csv(tmp_path / "fid.kl.csv")
    assert sorted(kl["dimension"]) == [0, 1, 2, 3]
    assert load_checkpoint(checkpoint_path).has_basis

    wav = write_wav(tmp_path / "in.wav", tone_clips[1])
    compact = commands.cmd_encode(checkpoint_path, wav, tmp_path / "c.ravl", fidelity=0.9)
    assert compact.compact and compact.dim <= 4 and compact.full_dim == 4
    out = commands.cmd_decode(checkpoint_path, tmp_path / "c.ravl", tmp_path / "c.wav")
    assert len(out) == 2048
    assert np.all(np.abs(out.samples) <= 1.0)


def test_full_fidelity_compact_code_matches_plain_decode(tmp_path, checkpoint_path, tone_clips):
    # two fit rows leave trailing singular values at zero
    basis = fit_basis(latent_matrix(np.random.default_rng(9).standard_normal((2, 4))))
    assert np.count_nonzero(basis.singular_values > 1e-10) < basis.dim
    save_checkpoint(checkpoint_path, load_checkpoint(checkpoint_path).with_basis(basis))

    wav = write_wav(tmp_path / "in.wav", tone_clips[3])
    commands.cmd_encode(checkpoint_path, wav, tmp_path / "plain.ravl")
    compact = commands.cmd_encode(checkpoint_path, wav, tmp_path / "full.ravl", fidelity=1.0)
    assert compact.compact and compact.dim == 4

    plain = commands.cmd_decode(checkpoint_path, tmp_path / "plain.ravl", tmp_path / "plain.wav")
    full = commands.cmd_decode(checkpoint_path, tmp_path / "full.ravl", tmp_path / "full.wav", seed=5)
    np.testing.assert_allclose(full.samples, plain.samples, atol=1e-5)
    logger.info("✅ Full-fidelity compact code decodes like the plain latent")


def test_transfer_and_bench_flows(tmp_path, checkpoint_path, tone_clips):
    noise = write_wav(tmp_path / "noise.wav", Waveform(np.random.default_rng(6).uniform(-0.5, 0.5, 1500), 8000))
    reference = write_wav(tmp_path / "ref.wav", tone_clips[2])
    result = commands.cmd_transfer(checkpoint_path, noise, tmp_path / "t.wav", reference=reference)
    assert len(read_wav(tmp_path / "t.wav")) == 1500
    assert result.reference_kl is not None

    reports = commands.cmd_bench(checkpoint_path, ("full", "no_multiband"), trials=2, out_csv=tmp_path / "bench.csv")
    assert [r.mode for r in reports] == ["full", "no_multiband"]
    table = pd.read_csv(tmp_path / "bench.csv")
    assert len(table) == 2 * (2 + 1)
    assert (table["trial"] == "summary").sum() == 2


def test_train_flow_writes_checkpoint_and_metrics(tmp_path, capsys):
    out_dir = tmp_path / "run"
    config = tmp_path / "train.cfg"
    config.write_text(_config_text(out_dir))
    assert main(["train", str(config)]) == 0
    assert "Trained 3 steps" in capsys.readouterr().out

    checkpoint = load_checkpoint(out_dir / "checkpoint.rave")
    assert checkpoint.meta["step"] == 3
    assert checkpoint.train_config.stage1_steps == 2
    metrics = pd.read_csv(out_dir / "metrics.csv")
    assert len(metrics) == 3
    logger.info("✅ Train verb wrote checkpoint and metrics")
