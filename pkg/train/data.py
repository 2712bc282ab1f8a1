"""
Training Data
Clip collection, per-step deterministic batches and a bounded prefetch queue
"""

import logging
import queue
import threading
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from core.exceptions import DataError
from core.precision import default_dtype
from core.seeding import STREAM_DATA, STREAM_PROBE, derive_rng
from dsp.augment import dequantize, random_allpass, random_crop
from dsp.signal import Waveform
from .config import TrainConfig

logger = logging.getLogger(__name__)


@dataclass
class AudioDataset:
    """Mono clips at one sample rate; clips shorter than the crop are skipped"""
    clips: List[Waveform] = field(default_factory=list)
    names: List[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.names:
            self.names = [f"clip_{index:04d}" for index in range(len(self.clips))]
        rates = {clip.sample_rate for clip in self.clips}
        if len(rates) > 1:
            raise DataError(f"Clips have mixed sample rates: {sorted(rates)}")

    def __len__(self) -> int:
        return len(self.clips)

    @property
    def sample_rate(self) -> int:
        if not self.clips:
            raise DataError("Dataset is empty")
        return self.clips[0].sample_rate

    def usable(self, length: int) -> "AudioDataset":
        kept = [(clip, name) for clip, name in zip(self.clips, self.names) if len(clip) >= length]
        skipped = len(self.clips) - len(kept)
        if skipped:
            logger.warning(f"Skipping {skipped} clips shorter than {length} samples")
        if not kept:
            raise DataError(f"No clip holds at least {length} samples")
        return AudioDataset([clip for clip, _ in kept], [name for _, name in kept])

    def sample_batch(self, step: int, cfg: TrainConfig, augment: bool = True) -> np.ndarray:
        """Batch for one training step, a pure function of (seed, step)"""
        rng = derive_rng(cfg.seed, STREAM_DATA, step)
        return self._draw(rng, cfg.batch_size, cfg, augment)

    def probe_batch(self, cfg: TrainConfig, size: Optional[int] = None) -> np.ndarray:
        """Fixed un-augmented batch for evaluation and latent probes"""
        rng = derive_rng(cfg.seed, STREAM_PROBE, 0)
        return self._draw(rng, size or cfg.batch_size, cfg, augment=False)

    def _draw(self, rng: np.random.Generator, count: int, cfg: TrainConfig, augment: bool) -> np.ndarray:
        if not self.clips:
            raise DataError("Dataset is empty")
        lengths = np.array([len(clip) for clip in self.clips], dtype=np.float64)
        batch = np.empty((count, cfg.n_signal), dtype=default_dtype())
        for row in range(count):
            index = int(rng.choice(len(self.clips), p=lengths / lengths.sum()))
            crop = random_crop(self.clips[index], cfg.n_signal, rng)
            if augment and cfg.allpass:
                crop = random_allpass(crop, rng)
            if augment and cfg.dequantize_bits:
                crop = dequantize(crop, cfg.dequantize_bits, rng)
            batch[row] = crop.samples
        return batch


class BatchPrefetcher:
    """Produces batches for a step range on a worker thread, in step order"""

    def __init__(self, dataset: AudioDataset, cfg: TrainConfig, steps: Sequence[int]):
        self.dataset = dataset
        self.cfg = cfg
        self.steps = list(steps)
        self._queue: "queue.Queue[Tuple[int, object]]" = queue.Queue(maxsize=max(cfg.prefetch, 1))
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None

    def _work(self) -> None:
        for step in self.steps:
            if self._stop.is_set():
                return
            try:
                item = self.dataset.sample_batch(step, self.cfg)
            except Exception as e:
                logger.error(f"Batch preparation failed at step {step}: {e}")
                item = e
            while not self._stop.is_set():
                try:
                    self._queue.put((step, item), timeout=0.1)
                    break
                except queue.Full:
                    continue

    def __iter__(self) -> Iterator[Tuple[int, np.ndarray]]:
        if self.cfg.prefetch == 0:
            for step in self.steps:
                yield step, self.dataset.sample_batch(step, self.cfg)
            return
        self._thread = threading.Thread(target=self._work, name="batch-prefetch", daemon=True)
        self._thread.start()
        try:
            for _ in self.steps:
                step, item = self._queue.get()
                if isinstance(item, Exception):
                    raise item
                yield step, item
        finally:
            self.close()

    def close(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=1.0)
            self._thread = None
