"""
Latent File Format
Little-endian header followed by float32 frames, channel-major

Header layout (28 bytes):
    magic        4s   b"RAVL"
    version      u16
    flags        u16  bit 0 set when the frames are compact basis coordinates
    dim          u32  stored dimension (the rank for compact latents)
    full_dim     u32  model latent dimension
    frame_rate   u32  milli-Hz
    frames       u32
    fidelity     f32  0 when not compact
"""

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from core.exceptions import DataError

logger = logging.getLogger(__name__)

MAGIC = b"RAVL"
VERSION = 1
HEADER = struct.Struct("<4sHHIIIIf")
FLAG_COMPACT = 1


@dataclass(frozen=True)
class LatentFile:
    """Latent trajectory [dim x frames] for one mono stream"""
    values: np.ndarray
    frame_rate_mhz: int
    full_dim: int
    compact: bool = False
    fidelity: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float32)
        if values.ndim != 2:
            raise DataError(f"Latent values must be [dim x frames], got shape {values.shape}")
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    @property
    def frames(self) -> int:
        return int(self.values.shape[1])

    @property
    def frame_rate(self) -> float:
        return self.frame_rate_mhz / 1000.0

    def to_bytes(self) -> bytes:
        header = HEADER.pack(
            MAGIC, VERSION, FLAG_COMPACT if self.compact else 0,
            self.dim, self.full_dim, self.frame_rate_mhz, self.frames, self.fidelity
        )
        return header + self.values.astype("<f4").tobytes(order="C")

    @classmethod
    def from_bytes(cls, blob: bytes, source: str = "<bytes>") -> "LatentFile":
        if len(blob) < HEADER.size:
            raise DataError(f"Latent file {source} is shorter than its header", path=source)
        magic, version, flags, dim, full_dim, rate, frames, fidelity = HEADER.unpack_from(blob)
        if magic != MAGIC:
            raise DataError(f"{source} is not a latent file (magic {magic!r})", path=source)
        if version != VERSION:
            raise DataError(f"{source} has unsupported latent file version {version}", path=source)
        expected = HEADER.size + 4 * dim * frames
        if len(blob) != expected:
            raise DataError(f"{source} holds {len(blob)} bytes, header declares {expected}", path=source)
        values = np.frombuffer(blob, dtype="<f4", offset=HEADER.size).reshape(dim, frames)
        return cls(values.astype(np.float32), rate, full_dim, bool(flags & FLAG_COMPACT), float(fidelity))


def frame_rate_mhz(rate_hz: float) -> int:
    return int(round(rate_hz * 1000.0))


def write_latent_file(path: Union[str, Path], latent: LatentFile) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(latent.to_bytes())
    except OSError as e:
        raise DataError(f"Cannot write latent file {path}: {e}", path=str(path)) from e
    logger.debug(f"Wrote {latent.frames} frames of dimension {latent.dim} to {path}")
    return path


def read_latent_file(path: Union[str, Path]) -> LatentFile:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise DataError(f"Cannot read latent file {path}: {e}", path=str(path)) from e
    return LatentFile.from_bytes(blob, str(path))
