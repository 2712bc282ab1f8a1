"""
Multiband Layers
The filter bank as fixed causal convolutions inside the network graph
"""

import numpy as np

from autograd import functional as F
from autograd.nn import Module
from autograd.tensor import Tensor
from core.exceptions import ShapeError
from pqmf.bank import PqmfBank


class PqmfAnalysis(Module):
    """[B x 1 x T] -> [B x M x T/M] with a stride-M correlation over L - 1 past samples"""

    def __init__(self, bank: PqmfBank):
        super().__init__()
        self.bands = bank.bands
        self._kernel = Tensor(bank.analysis_kernel)

    @property
    def left_context(self) -> int:
        return self._kernel.shape[-1] - 1

    def forward(self, x: Tensor, stream=None) -> Tensor:
        if x.shape[-1] % self.bands:
            raise ShapeError(f"Signal length {x.shape[-1]} is not a multiple of {self.bands} bands")
        kernel = self._kernel if self._kernel.dtype == x.dtype else Tensor(self._kernel.data, dtype=x.dtype)
        if stream is not None:
            x = stream.push(self, x, self.left_context)
        else:
            x = F.pad1d(x, self.left_context, 0)
        return F.conv1d(x, kernel, stride=self.bands)


class PqmfSynthesis(Module):
    """[B x M x Q] -> [B x 1 x M*Q] by M phase filters at the band rate, interleaved"""

    def __init__(self, bank: PqmfBank):
        super().__init__()
        self.bands = bank.bands
        self._kernel = Tensor(bank.synthesis_kernel)

    @property
    def left_context(self) -> int:
        return self._kernel.shape[-1] - 1

    def forward(self, y: Tensor, stream=None) -> Tensor:
        if y.ndim != 3 or y.shape[1] != self.bands:
            raise ShapeError("Band count does not match the bank", expected=self.bands, actual=y.shape)
        kernel = self._kernel if self._kernel.dtype == y.dtype else Tensor(self._kernel.data, dtype=y.dtype)
        if stream is not None:
            y = stream.push(self, y, self.left_context)
        else:
            y = F.pad1d(y, self.left_context, 0)
        phases = F.conv1d(y, kernel)
        batch, _, frames = phases.shape
        return F.reshape(F.transpose(phases, (0, 2, 1)), (batch, 1, frames * self.bands))


def as_signal_tensor(x) -> Tensor:
    """Audio batch [B x T] or [B x 1 x T] as a constant [B x 1 x T] tensor"""
    if isinstance(x, Tensor):
        data = x
    else:
        data = Tensor(np.asarray(x))
    if data.ndim == 1:
        data = F.reshape(data, (1, 1, data.shape[0]))
    elif data.ndim == 2:
        data = F.reshape(data, (data.shape[0], 1, data.shape[1]))
    elif data.ndim != 3 or data.shape[1] != 1:
        raise ShapeError("Audio batch must be [B x T] or [B x 1 x T]", actual=data.shape)
    return data
