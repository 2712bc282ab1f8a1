"""
Realtime Audio VAE - Autograd Engine
Reverse-mode tensors, differentiable operations, layers, Adam and gradient checks
"""

from .tensor import Tensor, ComputeGraph, backward, no_grad, is_grad_enabled
from .nn import Module, Parameter, Conv1d, ConvTranspose1d, Dense, BatchNorm1d
from .optim import Adam, AdamState, adam_step
from .gradcheck import gradcheck, GradCheckResult
from . import functional

__all__ = [
    'Tensor',
    'ComputeGraph',
    'backward',
    'no_grad',
    'is_grad_enabled',
    'Module',
    'Parameter',
    'Conv1d',
    'ConvTranspose1d',
    'Dense',
    'BatchNorm1d',
    'Adam',
    'AdamState',
    'adam_step',
    'gradcheck',
    'GradCheckResult',
    'functional'
]
