"""
Gradient Verification
Central finite differences against the recorded backward pass
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from core.precision import float64_mode
from . import functional as F
from .tensor import Tensor, no_grad

logger = logging.getLogger(__name__)


@dataclass
class GradCheckResult:
    max_relative_error: float
    tolerance: float
    per_input: Dict[int, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_relative_error < self.tolerance


def _scalar(out: Tensor, projection: np.ndarray) -> Tensor:
    return F.sum(out * projection)


def gradcheck(
    fn: Callable[..., Tensor],
    inputs: Sequence[Tensor],
    step: float = 1e-4,
    tolerance: float = 1e-3,
    atol: float = 1e-8,
    max_entries: Optional[int] = None,
    seed: int = 0
) -> GradCheckResult:
    """Compare analytic and numeric gradients of fn(*inputs) in float64

    Non-scalar outputs are reduced with a fixed random projection. The error
    of each input is ||analytic - numeric||_inf / max(||analytic||_inf, ||numeric||_inf, atol).
    """
    rng = np.random.default_rng(seed)
    with float64_mode():
        inputs = [Tensor(np.array(t.data, dtype=np.float64), requires_grad=t.requires_grad) for t in inputs]
        out = fn(*inputs)
        projection = rng.standard_normal(out.shape)
        for t in inputs:
            t.grad = None
        _scalar(out, projection).backward()

        result = GradCheckResult(max_relative_error=0.0, tolerance=tolerance)
        for index, t in enumerate(inputs):
            if not t.requires_grad:
                continue
            analytic = np.zeros_like(t.data) if t.grad is None else t.grad
            flat = t.data.reshape(-1)
            positions = np.arange(flat.size)
            if max_entries is not None and flat.size > max_entries:
                positions = np.sort(rng.choice(flat.size, size=max_entries, replace=False))
            numeric = np.zeros(positions.size)
            with no_grad():
                for k, position in enumerate(positions):
                    original = flat[position]
                    flat[position] = original + step
                    upper = _scalar(fn(*inputs), projection).item()
                    flat[position] = original - step
                    lower = _scalar(fn(*inputs), projection).item()
                    flat[position] = original
                    numeric[k] = (upper - lower) / (2.0 * step)
            picked = analytic.reshape(-1)[positions]
            scale = max(np.max(np.abs(picked)), np.max(np.abs(numeric)), atol)
            error = float(np.max(np.abs(picked - numeric)) / scale)
            result.per_input[index] = error
            result.max_relative_error = max(result.max_relative_error, error)

    logger.debug(f"gradcheck max relative error {result.max_relative_error:.3e}")
    return result
