"""
Trainable Layers
Module container plus the causal convolution, upsampling, dense and batch-norm layers

Causal layers pad only on the left. When a stream state is passed to
forward, the left context comes from the state's cache instead of zeros,
so chunked processing reproduces the one-shot output exactly.
"""

import logging
import math
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from core.exceptions import CheckpointError, ShapeError
from core.precision import default_dtype
from . import functional as F
from .tensor import Tensor

logger = logging.getLogger(__name__)

LEAKY_SLOPE = 0.2


class Parameter(Tensor):
    """Trainable leaf tensor"""

    def __init__(self, data, name: Optional[str] = None):
        super().__init__(data, requires_grad=True, name=name)


def kaiming_uniform(shape: Tuple[int, ...], fan_in: int, rng: np.random.Generator, slope: float = LEAKY_SLOPE) -> np.ndarray:
    bound = math.sqrt(6.0 / ((1.0 + slope ** 2) * fan_in))
    return rng.uniform(-bound, bound, size=shape)


def bias_uniform(size: int, fan_in: int, rng: np.random.Generator) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=size)


class Module:
    """Tree of parameters, buffers and child modules discovered from attributes"""

    def __init__(self):
        self.training = True
        self._buffers: Dict[str, np.ndarray] = {}

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def register_buffer(self, name: str, value: np.ndarray) -> None:
        self._buffers[name] = value

    def _children(self) -> Iterator[Tuple[str, object]]:
        for name, value in vars(self).items():
            if name.startswith("_"):
                continue
            if isinstance(value, (Parameter, Module)):
                yield name, value
            elif isinstance(value, (list, tuple)) and value and all(isinstance(v, Module) for v in value):
                for index, item in enumerate(value):
                    yield f"{name}.{index}", item

    def named_modules(self, prefix: str = "") -> Iterator[Tuple[str, "Module"]]:
        yield prefix, self
        for name, child in self._children():
            if isinstance(child, Module):
                yield from child.named_modules(f"{prefix}.{name}" if prefix else name)

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for name, child in self._children():
            full = f"{prefix}.{name}" if prefix else name
            if isinstance(child, Parameter):
                yield full, child
            else:
                yield from child.named_parameters(full)

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self) -> Iterator[Tuple[str, np.ndarray]]:
        for module_name, module in self.named_modules():
            for name, value in module._buffers.items():
                yield (f"{module_name}.{name}" if module_name else name), value

    def parameter_count(self) -> int:
        return int(sum(p.data.size for p in self.parameters()))

    def train(self, mode: bool = True) -> "Module":
        for _, module in self.named_modules():
            module.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> Dict[str, np.ndarray]:
        state = {name: p.data for name, p in self.named_parameters()}
        state.update(dict(self.named_buffers()))
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        expected = self.state_dict()
        missing = sorted(set(expected) - set(state))
        unexpected = sorted(set(state) - set(expected))
        if missing or unexpected:
            raise CheckpointError(f"State mismatch: missing {missing}, unexpected {unexpected}")
        params = dict(self.named_parameters())
        buffers = {}
        for module_name, module in self.named_modules():
            for key in module._buffers:
                buffers[f"{module_name}.{key}" if module_name else key] = (module, key)
        for name, value in state.items():
            target = expected[name]
            if tuple(target.shape) != tuple(np.shape(value)):
                raise CheckpointError(f"Shape mismatch for {name}: {target.shape} vs {np.shape(value)}")
            if name in params:
                params[name].data = np.array(value, dtype=params[name].data.dtype)
            else:
                module, key = buffers[name]
                module._buffers[key] = np.array(value, dtype=target.dtype)


class Conv1d(Module):
    """1-D convolution, causal by default

    Non-causal layers pad symmetrically and cannot be streamed.
    """

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        stride: int = 1,
        dilation: int = 1,
        groups: int = 1,
        bias: bool = True,
        causal: bool = True
    ):
        super().__init__()
        if in_channels % groups or out_channels % groups:
            raise ShapeError(f"Channels {in_channels}->{out_channels} not divisible by groups {groups}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.dilation = dilation
        self.groups = groups
        self.causal = causal
        fan_in = (in_channels // groups) * kernel_size
        self.weight = Parameter(kaiming_uniform((out_channels, in_channels // groups, kernel_size), fan_in, rng))
        self.bias = Parameter(bias_uniform(out_channels, fan_in, rng)) if bias else None

    @property
    def left_context(self) -> int:
        return self.dilation * (self.kernel_size - 1) if self.causal else 0

    def forward(self, x: Tensor, stream=None) -> Tensor:
        if not self.causal:
            padding = self.dilation * (self.kernel_size - 1) // 2
            return F.conv1d(x, self.weight, self.bias, self.stride, padding, self.dilation, self.groups)
        if stream is not None:
            x = stream.push(self, x, self.left_context)
        else:
            x = F.pad1d(x, self.left_context, 0)
        return F.conv1d(x, self.weight, self.bias, self.stride, 0, self.dilation, self.groups)


class ConvTranspose1d(Module):
    """Causal upsampling by `ratio` with kernel 2 * ratio

    The input is extended by ceil(K / ratio) - 1 past frames and the scatter
    result is cropped so output sample n only depends on inputs up to n // ratio.
    """

    def __init__(self, in_channels: int, out_channels: int, ratio: int, rng: np.random.Generator, bias: bool = True):
        super().__init__()
        self.ratio = ratio
        self.kernel_size = 2 * ratio
        self.in_channels = in_channels
        self.out_channels = out_channels
        fan_in = in_channels * self.kernel_size // ratio
        self.weight = Parameter(kaiming_uniform((in_channels, out_channels, self.kernel_size), fan_in, rng))
        self.bias = Parameter(bias_uniform(out_channels, fan_in, rng)) if bias else None

    @property
    def left_context(self) -> int:
        return -(-self.kernel_size // self.ratio) - 1

    def forward(self, x: Tensor, stream=None) -> Tensor:
        frames = x.shape[-1]
        context = self.left_context
        if stream is not None:
            x = stream.push(self, x, context)
        else:
            x = F.pad1d(x, context, 0)
        return F.conv_transpose1d(
            x, self.weight, self.bias, stride=self.ratio,
            padding=context * self.ratio, output_length=frames * self.ratio
        )


class Dense(Module):
    """Affine map over the last axis"""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, bias: bool = True):
        super().__init__()
        self.weight = Parameter(kaiming_uniform((in_features, out_features), in_features, rng))
        self.bias = Parameter(bias_uniform(out_features, in_features, rng)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return F.dense(x, self.weight, self.bias)


class BatchNorm1d(Module):
    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        self.momentum = momentum
        self.eps = eps
        self.gamma = Parameter(np.ones(channels))
        self.beta = Parameter(np.zeros(channels))
        self.register_buffer("running_mean", np.zeros(channels, dtype=default_dtype()))
        self.register_buffer("running_var", np.ones(channels, dtype=default_dtype()))

    def forward(self, x: Tensor) -> Tensor:
        return F.batch_norm(
            x, self.gamma, self.beta,
            self._buffers["running_mean"], self._buffers["running_var"],
            training=self.training, momentum=self.momentum, eps=self.eps
        )
