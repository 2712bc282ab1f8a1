"""
Synthetic Corpus
Seeded harmonic tones with envelopes and an optional filtered-noise floor, written as a WAV folder
"""

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import signal as sps

from core.exceptions import DataError
from core.seeding import STREAM_CORPUS, derive_rng
from dsp.signal import Waveform
from train.data import AudioDataset
from .wavio import FORMATS, read_wav, write_wav

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
PEAK_LEVEL = 0.8


class CorpusSpec(BaseModel):
    """Generator settings; the same spec always regenerates the same files"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    seed: int = 0
    n_clips: int = Field(default=32, ge=1)
    duration: float = Field(default=2.0, gt=0.0)
    sample_rate: int = Field(default=16000, gt=0)

    # Tones
    min_partials: int = Field(default=1, ge=1)
    max_partials: int = Field(default=4, ge=1)
    f0_min: float = Field(default=80.0, gt=0.0)
    f0_max: float = Field(default=2000.0, gt=0.0)
    harmonic_cap: Optional[float] = None

    # Noise floor, 0 disables
    noise_level: float = Field(default=0.0, ge=0.0)
    noise_cutoff: float = Field(default=0.25, gt=0.0, lt=1.0)

    wav_format: str = "pcm16"
    workers: int = Field(default=4, ge=1)

    @model_validator(mode="after")
    def _check_ranges(self) -> "CorpusSpec":
        if self.min_partials > self.max_partials:
            raise ValueError("min_partials exceeds max_partials")
        if self.f0_min > self.f0_max:
            raise ValueError("f0_min exceeds f0_max")
        if self.f0_max >= self.sample_rate / 2:
            raise ValueError(f"f0_max {self.f0_max} Hz must stay below Nyquist")
        if self.wav_format not in FORMATS:
            raise ValueError(f"wav_format must be one of {FORMATS}")
        return self

    @property
    def samples_per_clip(self) -> int:
        return int(round(self.duration * self.sample_rate))

    @property
    def partial_cap(self) -> float:
        """Highest partial frequency; defaults to twice f0_max, always below Nyquist"""
        cap = self.harmonic_cap if self.harmonic_cap is not None else 2.0 * self.f0_max
        return min(cap, 0.45 * self.sample_rate)

    def digest(self) -> str:
        """sha256 of the sorted-key JSON form, excluding the worker count"""
        values = self.model_dump(mode="json", exclude={"workers"})
        return hashlib.sha256(json.dumps(values, sort_keys=True).encode("utf-8")).hexdigest()


def _envelope(rng: np.random.Generator, n: int, rate: int) -> np.ndarray:
    t = np.arange(n) / rate
    attack = rng.uniform(0.005, 0.1)
    decay = rng.uniform(0.3, 3.0)
    tremolo_rate = rng.uniform(0.5, 6.0)
    tremolo_depth = rng.uniform(0.0, 0.3)
    rise = np.minimum(t / attack, 1.0)
    fall = np.exp(-np.maximum(t - attack, 0.0) / decay)
    tremolo = 1.0 - tremolo_depth * 0.5 * (1.0 + np.sin(2 * np.pi * tremolo_rate * t))
    return rise * fall * tremolo


def generate_clip(spec: CorpusSpec, index: int) -> Waveform:
    """Clip `index`, drawn from its own derived stream"""
    rng = derive_rng(spec.seed, STREAM_CORPUS, index)
    n = spec.samples_per_clip
    t = np.arange(n) / spec.sample_rate
    f0 = float(np.exp(rng.uniform(np.log(spec.f0_min), np.log(spec.f0_max))))
    partials = int(rng.integers(spec.min_partials, spec.max_partials + 1))

    audio = np.zeros(n)
    for k in range(1, partials + 1):
        freq = k * f0
        if freq > spec.partial_cap:
            break
        phase = rng.uniform(0.0, 2 * np.pi)
        audio += np.sin(2 * np.pi * freq * t + phase) / k
    audio *= _envelope(rng, n, spec.sample_rate)

    if spec.noise_level > 0.0:
        sos = sps.butter(4, spec.noise_cutoff, output="sos")
        audio += spec.noise_level * sps.sosfilt(sos, rng.standard_normal(n))

    peak = np.max(np.abs(audio))
    if peak > 0.0:
        audio *= PEAK_LEVEL / peak
    return Waveform(audio, spec.sample_rate)


def generate_corpus(spec: CorpusSpec) -> List[Waveform]:
    """All clips in index order; workers only change wall time"""
    with ThreadPoolExecutor(max_workers=spec.workers) as pool:
        return list(pool.map(lambda index: generate_clip(spec, index), range(spec.n_clips)))


def clip_name(index: int) -> str:
    return f"clip_{index:04d}.wav"


def _file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_corpus(spec: CorpusSpec, out_dir: Union[str, Path]) -> Path:
    """WAV files plus a manifest holding the spec, its hash and per-file hashes"""
    out_dir = Path(out_dir)
    clips = generate_corpus(spec)
    files = {}
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for index, clip in enumerate(clips):
            path = write_wav(out_dir / clip_name(index), clip, spec.wav_format)
            files[path.name] = _file_digest(path)
        manifest = {
            "spec": spec.model_dump(mode="json", exclude={"workers"}),
            "spec_sha256": spec.digest(),
            "files": files
        }
        (out_dir / MANIFEST_NAME).write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    except OSError as e:
        raise DataError(f"Cannot write corpus: {e}", path=str(out_dir)) from e
    logger.info(f"Wrote {len(clips)} clips to {out_dir} (spec {spec.digest()[:12]})")
    return out_dir


def load_wav_folder(path: Union[str, Path], max_clips: Optional[int] = None) -> AudioDataset:
    """Every .wav file in a folder, sorted by name"""
    path = Path(path)
    if not path.is_dir():
        raise DataError(f"Dataset folder not found: {path}", path=str(path))
    files = sorted(p for p in path.iterdir() if p.suffix.lower() == ".wav")
    if max_clips is not None:
        files = files[:max_clips]
    if not files:
        raise DataError(f"No WAV files in {path}", path=str(path))
    return AudioDataset([read_wav(p) for p in files], [p.stem for p in files])
