"""
Adam Optimizer
Bias-corrected adaptive moment updates over a parameter list
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .tensor import Tensor

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """First and second moment estimates plus the step count"""
    step: int = 0
    first: List[np.ndarray] = field(default_factory=list)
    second: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def zeros_like(cls, params: Sequence[Tensor]) -> "AdamState":
        return cls(
            step=0,
            first=[np.zeros_like(p.data) for p in params],
            second=[np.zeros_like(p.data) for p in params]
        )

    def as_arrays(self, prefix: str) -> Dict[str, np.ndarray]:
        arrays = {}
        for index, (m, v) in enumerate(zip(self.first, self.second)):
            arrays[f"{prefix}.m.{index}"] = m
            arrays[f"{prefix}.v.{index}"] = v
        return arrays


def adam_step(
    params: Sequence[Tensor],
    grads: Sequence[np.ndarray],
    state: AdamState,
    lr: float = 1e-4,
    betas: Tuple[float, float] = (0.5, 0.9),
    eps: float = 1e-8
) -> None:
    """One in-place Adam update; a missing gradient counts as zero"""
    beta1, beta2 = betas
    state.step += 1
    correction1 = 1.0 - beta1 ** state.step
    correction2 = 1.0 - beta2 ** state.step
    for index, (param, grad) in enumerate(zip(params, grads)):
        if grad is None:
            grad = np.zeros_like(param.data)
        m = state.first[index]
        v = state.second[index]
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * grad * grad
        update = lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
        param.data = (param.data - update).astype(param.data.dtype, copy=False)


class Adam:
    """Adam bound to a fixed parameter list"""

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-4, betas: Tuple[float, float] = (0.5, 0.9), eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.betas = tuple(betas)
        self.eps = eps
        self.state = AdamState.zeros_like(self.params)

    def step(self) -> None:
        adam_step(self.params, [p.grad for p in self.params], self.state, self.lr, self.betas, self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def state_dict(self, prefix: str) -> Dict[str, np.ndarray]:
        return self.state.as_arrays(prefix)

    def load_state_dict(self, arrays: Dict[str, np.ndarray], prefix: str, step: int) -> None:
        self.state.step = int(step)
        for index in range(len(self.params)):
            self.state.first[index] = np.array(arrays[f"{prefix}.m.{index}"], dtype=self.params[index].data.dtype)
            self.state.second[index] = np.array(arrays[f"{prefix}.v.{index}"], dtype=self.params[index].data.dtype)
