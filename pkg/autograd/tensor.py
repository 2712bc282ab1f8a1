"""
Reverse-Mode Tensor Engine
Tensors record the operations that produced them; backward walks the graph in reverse
"""

import logging
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from core.exceptions import ShapeError
from core.precision import default_dtype

logger = logging.getLogger(__name__)

# Per thread, so independent graphs can be built concurrently
_grad_mode = threading.local()

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


def is_grad_enabled() -> bool:
    return getattr(_grad_mode, "enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Operations inside are not recorded"""
    previous = is_grad_enabled()
    _grad_mode.enabled = False
    try:
        yield
    finally:
        _grad_mode.enabled = previous


class Tensor:
    """Multi-dimensional real array with an optional gradient"""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None, dtype=None):
        self.data = np.asarray(data, dtype=dtype or default_dtype())
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[BackwardFn] = None
        self.name = name

    @classmethod
    def from_op(cls, data: np.ndarray, parents: Sequence["Tensor"], backward: BackwardFn) -> "Tensor":
        """Output of a recorded operation; the graph link is kept only when needed"""
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.name = None
        out.requires_grad = is_grad_enabled() and any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._parents = tuple(parents)
            out._backward = backward
        else:
            out._parents = ()
            out._backward = None
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, grad: Optional[np.ndarray] = None) -> "ComputeGraph":
        graph = ComputeGraph.trace(self)
        backward(graph, self, grad)
        return graph

    def __repr__(self) -> str:
        label = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad}{label})"

    # Arithmetic: tensor/tensor operands must share a shape; constants may
    # broadcast into the tensor's shape but never enlarge it.

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, -other if not isinstance(other, Tensor) else neg(other))

    def __rsub__(self, other):
        return add(neg(self), other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return rdiv(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent: float):
        return power(self, exponent)


def _constant(value, like: Tensor) -> np.ndarray:
    const = np.asarray(value, dtype=like.data.dtype)
    if np.broadcast_shapes(const.shape, like.shape) != like.shape:
        raise ShapeError("Constant operand would broadcast the tensor", expected=like.shape, actual=const.shape)
    return const


def _check_same(a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError("Tensor operands must have the same shape", expected=a.shape, actual=b.shape)


def add(a: Tensor, b: Union[Tensor, float, np.ndarray]) -> Tensor:
    if isinstance(b, Tensor):
        _check_same(a, b)
        return Tensor.from_op(a.data + b.data, (a, b), lambda g: (g, g))
    const = _constant(b, a)
    return Tensor.from_op(a.data + const, (a,), lambda g: (g,))


def mul(a: Tensor, b: Union[Tensor, float, np.ndarray]) -> Tensor:
    if isinstance(b, Tensor):
        _check_same(a, b)
        return Tensor.from_op(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))
    const = _constant(b, a)
    return Tensor.from_op(a.data * const, (a,), lambda g: (g * const,))


def div(a: Tensor, b: Union[Tensor, float, np.ndarray]) -> Tensor:
    if isinstance(b, Tensor):
        _check_same(a, b)
        out = a.data / b.data
        return Tensor.from_op(out, (a, b), lambda g: (g / b.data, -g * out / b.data))
    const = _constant(b, a)
    return Tensor.from_op(a.data / const, (a,), lambda g: (g / const,))


def rdiv(a: Union[float, np.ndarray], b: Tensor) -> Tensor:
    const = _constant(a, b)
    out = const / b.data
    return Tensor.from_op(out, (b,), lambda g: (-g * out / b.data,))


def neg(a: Tensor) -> Tensor:
    return Tensor.from_op(-a.data, (a,), lambda g: (-g,))


def power(a: Tensor, exponent: float) -> Tensor:
    p = float(exponent)
    return Tensor.from_op(a.data ** p, (a,), lambda g: (g * p * a.data ** (p - 1.0),))


@dataclass
class ComputeGraph:
    """Recorded operations in topological order plus the parameter leaves"""
    nodes: List[Tensor] = field(default_factory=list)
    parameters: List[Tensor] = field(default_factory=list)

    @classmethod
    def trace(cls, root: Tensor) -> "ComputeGraph":
        """Collect every tensor on a gradient path to root, parents first"""
        order: List[Tensor] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited or not node.requires_grad:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited and parent.requires_grad:
                    stack.append((parent, False))
        parameters = [node for node in order if node.is_leaf]
        return cls(nodes=order, parameters=parameters)


def backward(
    graph: ComputeGraph,
    loss: Tensor,
    grad: Optional[np.ndarray] = None,
    parameters: Optional[Iterable[Tensor]] = None
) -> None:
    """Accumulate d(loss)/d(leaf) into every leaf's .grad

    Parameters given explicitly but absent from the graph receive a zero
    gradient instead of staying unset.
    """
    if grad is None:
        if loss.data.size != 1:
            raise ShapeError("backward needs a scalar loss or an explicit gradient", actual=loss.shape)
        grad = np.ones_like(loss.data)
    pending = {id(loss): np.asarray(grad, dtype=loss.data.dtype)}

    for node in reversed(graph.nodes):
        g = pending.pop(id(node), None)
        if g is None:
            continue
        if node.is_leaf:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        parent_grads = node._backward(g)
        for parent, parent_grad in zip(node._parents, parent_grads):
            if parent_grad is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in pending:
                pending[key] = pending[key] + parent_grad
            else:
                pending[key] = parent_grad

    if parameters is not None:
        for param in parameters:
            if param.grad is None:
                param.grad = np.zeros_like(param.data)
