"""
Checkpoint Archive
Single-file text manifest plus raw little-endian tensors, written atomically

Layout:
    b"RAVE-CKPT <version> <manifest bytes>\\n"
    manifest: sorted-key JSON (configs, step, stage, tensor table)
    payload: tensors back to back in table order
"""

import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from core.exceptions import CheckpointError
from latent.analysis import FidelityBasis
from model.config import ModelConfig
from model.rave import RaveModel
from pqmf.bank import PqmfBank
from train.config import TrainConfig
from train.trainer import TrainState

logger = logging.getLogger(__name__)

MAGIC = "RAVE-CKPT"
FORMAT_VERSION = 1
STORED_DTYPES = {"float32": "<f4", "float64": "<f8"}

PathLike = Union[str, Path]


@dataclass
class Checkpoint:
    """Manifest metadata and named arrays of one archive"""
    meta: Dict[str, Any] = field(default_factory=dict)
    arrays: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def model_config(self) -> ModelConfig:
        return ModelConfig(**self.meta["model_config"])

    @property
    def train_config(self) -> Optional[TrainConfig]:
        values = self.meta.get("train_config")
        return TrainConfig(**values) if values is not None else None

    @property
    def has_basis(self) -> bool:
        return "basis.v" in self.arrays

    @property
    def basis(self) -> Optional[FidelityBasis]:
        return FidelityBasis.from_arrays(self.arrays) if self.has_basis else None

    def with_basis(self, basis: FidelityBasis) -> "Checkpoint":
        arrays = {k: v for k, v in self.arrays.items() if not k.startswith("basis.")}
        arrays.update(basis.to_arrays())
        return Checkpoint(dict(self.meta), arrays)


def _stored(array: np.ndarray) -> np.ndarray:
    array = np.asarray(array)
    kind = "float32" if array.dtype == np.float32 else "float64"
    return np.ascontiguousarray(array, dtype=STORED_DTYPES[kind])


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    """Archive bytes; equal inputs always give equal bytes"""
    table = []
    chunks = []
    offset = 0
    for name in sorted(checkpoint.arrays):
        array = _stored(checkpoint.arrays[name])
        blob = array.tobytes(order="C")
        table.append({
            "name": name,
            "dtype": "float32" if array.dtype == np.dtype("<f4") else "float64",
            "shape": list(array.shape),
            "offset": offset,
            "nbytes": len(blob)
        })
        chunks.append(blob)
        offset += len(blob)
    meta = dict(checkpoint.meta)
    meta["has_basis"] = checkpoint.has_basis
    manifest = json.dumps({"meta": meta, "tensors": table}, sort_keys=True, separators=(",", ":")).encode("utf-8")
    header = f"{MAGIC} {FORMAT_VERSION} {len(manifest)}\n".encode("ascii")
    return header + manifest + b"".join(chunks)


def decode_checkpoint(blob: bytes, source: str = "<bytes>") -> Checkpoint:
    newline = blob.find(b"\n")
    if newline < 0:
        raise CheckpointError(f"{source} has no checkpoint header", path=source)
    try:
        magic, version, length = blob[:newline].decode("ascii").split(" ")
        version, length = int(version), int(length)
    except (UnicodeDecodeError, ValueError) as e:
        raise CheckpointError(f"{source} has a malformed checkpoint header", path=source) from e
    if magic != MAGIC:
        raise CheckpointError(f"{source} is not a checkpoint", path=source)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{source} uses checkpoint format {version}, expected {FORMAT_VERSION}", path=source)

    start = newline + 1
    try:
        manifest = json.loads(blob[start:start + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{source} has a corrupt manifest: {e}", path=source) from e
    payload = memoryview(blob)[start + length:]

    arrays = {}
    expected_end = 0
    for entry in manifest["tensors"]:
        dtype = np.dtype(STORED_DTYPES.get(entry["dtype"], "<f8"))
        count = int(np.prod(entry["shape"], dtype=np.int64))
        if entry["nbytes"] != count * dtype.itemsize or entry["offset"] + entry["nbytes"] > len(payload):
            raise CheckpointError(f"Tensor {entry['name']} does not fit the payload of {source}", path=source)
        data = np.frombuffer(payload, dtype=dtype, count=count, offset=entry["offset"])
        arrays[entry["name"]] = data.reshape(entry["shape"]).astype(dtype.newbyteorder("="))
        expected_end = max(expected_end, entry["offset"] + entry["nbytes"])
    if expected_end != len(payload):
        raise CheckpointError(f"{source} carries {len(payload) - expected_end} unexpected payload bytes", path=source)

    meta = manifest["meta"]
    meta.pop("has_basis", None)
    return Checkpoint(meta, arrays)


def save_checkpoint(path: PathLike, checkpoint: Checkpoint) -> Path:
    """Write through a temporary file in the same directory, then rename over `path`"""
    path = Path(path)
    blob = encode_checkpoint(checkpoint)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, temp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(blob)
            os.replace(temp, path)
        except BaseException:
            if os.path.exists(temp):
                os.unlink(temp)
            raise
    except OSError as e:
        raise CheckpointError(f"Cannot write checkpoint: {e}", path=str(path)) from e
    logger.info(f"Checkpoint written to {path} ({len(blob)} bytes)")
    return path


def load_checkpoint(path: PathLike) -> Checkpoint:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"Cannot read checkpoint: {e}", path=str(path)) from e
    return decode_checkpoint(blob, str(path))


def capture(
    model: RaveModel,
    train_cfg: Optional[TrainConfig] = None,
    state: Optional[TrainState] = None,
    basis: Optional[FidelityBasis] = None
) -> Checkpoint:
    """Checkpoint of a model, its filter bank and optionally the training state and basis"""
    meta: Dict[str, Any] = {"model_config": model.cfg.model_dump(mode="json"), "step": 0, "stage": 1}
    arrays = dict(model.bank.to_arrays())
    if state is not None:
        state_arrays, state_meta = state.snapshot(model)
        arrays.update(state_arrays)
        meta.update({"step": state_meta["step"], "stage": state_meta["stage"], "train_state": state_meta})
    else:
        arrays.update({f"model.{k}": np.array(v, copy=True) for k, v in model.state_dict().items()})
    if train_cfg is not None:
        meta["train_config"] = train_cfg.model_dump(mode="json")
    if basis is not None:
        arrays.update(basis.to_arrays())
    return Checkpoint(meta, arrays)


def restore_model(checkpoint: Checkpoint) -> RaveModel:
    """Rebuild the model with its stored bank and weights"""
    try:
        bank = PqmfBank.from_arrays(checkpoint.arrays)
    except KeyError as e:
        raise CheckpointError(f"Checkpoint lacks filter bank entry {e}") from e
    model = RaveModel(checkpoint.model_config, bank=bank)
    model.load_state_dict({k[len("model."):]: v for k, v in checkpoint.arrays.items() if k.startswith("model.")})
    return model


def restore_state(checkpoint: Checkpoint, model: RaveModel, cfg: TrainConfig) -> TrainState:
    """Training state for resuming; a checkpoint without one starts at step 0"""
    state = TrainState.create(model, cfg)
    if "train_state" in checkpoint.meta:
        state.restore(model, checkpoint.arrays, checkpoint.meta["train_state"])
    return state
