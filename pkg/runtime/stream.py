"""
Streaming Inference
Block-wise causal encode and decode with per-layer cached input tails
"""

import logging
from typing import Dict, Optional, Union

import numpy as np

from autograd import functional as F
from autograd.tensor import Tensor, no_grad
from core.exceptions import ShapeError, StreamError
from core.seeding import STREAM_NOISE, derive_rng
from model.rave import LatentFrames, RaveModel

logger = logging.getLogger(__name__)


class StreamState:
    """
    Persistent context of one audio stream through one model

    - every causal layer keeps the last left_context inputs it saw
    - the noise synthesizer keeps the filter tail spilling into the next block
    - a fresh or reset state behaves as if preceded by silence
    """

    def __init__(self, model: RaveModel, batch: int = 1, block_frames: Optional[int] = None):
        if batch < 1:
            raise ShapeError(f"Stream batch must be positive, got {batch}")
        if block_frames is not None and block_frames < 1:
            raise ShapeError(f"Block frame count must be positive, got {block_frames}")
        self.model = model
        self.batch = batch
        self.block_frames = block_frames
        self._names: Dict[int, str] = {}
        self._contexts: Dict[int, int] = {}
        for name, module in model.named_modules():
            if hasattr(module, "left_context"):
                self._names[id(module)] = name
                self._contexts[id(module)] = int(module.left_context)
            elif hasattr(module, "overlap_taps"):
                self._names[id(module)] = name
                self._contexts[id(module)] = int(module.overlap_taps)
        self.reset()

    @property
    def block_size(self) -> Optional[int]:
        """Samples per block when the block length is fixed"""
        if self.block_frames is None:
            return None
        return self.block_frames * self.model.cfg.total_downsampling

    def reset(self) -> None:
        self._tails: Dict[int, np.ndarray] = {}
        self.noise_rng = derive_rng(self.model.cfg.seed, STREAM_NOISE, 0)
        self.blocks = 0

    def _check_owner(self, layer) -> int:
        key = id(layer)
        if key not in self._contexts:
            raise StreamError(f"{type(layer).__name__} does not belong to the stream's model")
        return key

    def cache_sizes(self) -> Dict[str, int]:
        """Context length kept per layer, keyed by module path"""
        return {self._names[key]: size for key, size in self._contexts.items()}

    def push(self, layer, x: Tensor, context: int) -> Tensor:
        """Prepend the cached tail of `layer` to x and keep the new tail"""
        key = self._check_owner(layer)
        if context != self._contexts[key]:
            raise StreamError(f"Layer context changed from {self._contexts[key]} to {context}")
        if context == 0:
            return x
        batch, channels, _ = x.shape
        tail = self._tails.get(key)
        if tail is None:
            tail = np.zeros((batch, channels, context), dtype=x.dtype)
        elif tail.shape[:2] != (batch, channels):
            raise StreamError(f"Cached tail of shape {tail.shape} does not fit input {x.shape}")
        extended = F.concat([Tensor(tail, dtype=x.dtype), x], axis=-1)
        self._tails[key] = np.array(extended.data[..., -context:], copy=True)
        return extended

    def overlap(self, owner, full: Tensor, keep: int) -> Tensor:
        """Add the carried tail into the block start, carry the part past `keep`"""
        key = self._check_owner(owner)
        tail = self._tails.get(key)
        if tail is not None:
            padded = np.zeros(full.shape, dtype=full.dtype)
            padded[..., :tail.shape[-1]] = tail
            full = full + padded
        self._tails[key] = np.array(full.data[..., keep:], copy=True)
        return F.crop(full, 0, keep)


def _check_block(state: StreamState, frames: int) -> None:
    if frames < 1:
        raise ShapeError("A stream block needs at least one latent frame")
    if state.block_frames is not None and frames != state.block_frames:
        raise StreamError(f"Block of {frames} frames does not match the stream's {state.block_frames}")


def stream_decode(state: StreamState, z_block: Union[LatentFrames, np.ndarray], model: Optional[RaveModel] = None) -> np.ndarray:
    """Latent block [B x D x frames] to audio [B x frames * factor]

    Concatenated outputs equal one offline decode of the concatenated latents.
    """
    model = model or state.model
    if model is not state.model:
        raise StreamError("Stream state was created for a different model")
    values = z_block.values if isinstance(z_block, LatentFrames) else np.asarray(z_block)
    if values.ndim == 2:
        values = values[None]
    if values.shape[0] != state.batch:
        raise StreamError(f"Block batch {values.shape[0]} does not match the stream's {state.batch}")
    _check_block(state, values.shape[-1])
    model.eval()
    with no_grad():
        audio = model.decode(values, stream=state).data
    state.blocks += 1
    return audio[:, 0, :]


def stream_encode(state: StreamState, x_block: np.ndarray, model: Optional[RaveModel] = None) -> LatentFrames:
    """Audio block [B x samples] to posterior-mode frames, causal and block-consistent"""
    model = model or state.model
    if model is not state.model:
        raise StreamError("Stream state was created for a different model")
    x = np.asarray(x_block)
    if x.ndim == 1:
        x = x[None]
    if x.shape[0] != state.batch:
        raise StreamError(f"Block batch {x.shape[0]} does not match the stream's {state.batch}")
    factor = model.cfg.total_downsampling
    if x.shape[-1] % factor:
        raise ShapeError(f"Block of {x.shape[-1]} samples is not a multiple of {factor}")
    _check_block(state, x.shape[-1] // factor)
    model.eval()
    with no_grad():
        q = model.encode(x, stream=state)
    state.blocks += 1
    return LatentFrames(np.array(q.mean.data), model.cfg.latent_rate)


def stream_latency(model: RaveModel) -> int:
    """Delay in samples between an input sample and its resynthesis

    Every layer is causal, so streamed and offline decodes align with zero
    lag; the encode-decode chain inherits the filter bank group delay.
    """
    return int(model.bank.group_delay)
