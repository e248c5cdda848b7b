"""
Tensor and Tape Module

This module provides the data carrier and the gradient tape of the JSCCF
autodiff engine:
- Tensor: a numpy array with optional gradient participation
- Tape: the recorded graph; operations append nodes while a tape is active
- backward: reverse-mode differentiation of a scalar loss over a tape

Recording is thread-local, so independent graphs (one per worker) can be
built concurrently. Nodes are replayed in exact reverse recording order,
which makes gradient accumulation deterministic.
"""

import logging
import threading
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from JSCCF.autodiff.config.config import DEFAULT_DTYPE
from JSCCF.errors import ShapeError, UsageError

logger = logging.getLogger("JSCCF.autodiff.tensor")

_local = threading.local()


class Tensor:
    """An n-dimensional real array that can take part in a gradient tape."""

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        name: Optional[str] = None,
        floor: Optional[float] = None,
        dtype=None,
    ):
        """
        Wrap ``data`` as a leaf tensor.

        Args:
            data: Array-like values; floating arrays keep their dtype
            requires_grad: Whether gradients are accumulated into ``grad``
            name: Optional parameter name (used by checkpoints and optimizers)
            floor: Optional lower bound the optimizer projects onto after a step
            dtype: Explicit dtype; defaults to the array's float dtype or float32
        """
        if dtype is None:
            is_float = isinstance(data, np.ndarray) and data.dtype in (np.float32, np.float64)
            dtype = data.dtype if is_float else DEFAULT_DTYPE
        self.data = np.asarray(data, dtype=dtype)
        self.name = name
        self.floor = floor
        self.is_leaf = True
        self.grad: Optional[np.ndarray] = None
        self._requires_grad = False
        self.requires_grad = requires_grad

    @property
    def requires_grad(self) -> bool:
        return self._requires_grad

    @requires_grad.setter
    def requires_grad(self, value: bool) -> None:
        self._requires_grad = bool(value)
        if self._requires_grad and self.is_leaf and self.grad is None:
            self.grad = np.zeros_like(self.data)

    @classmethod
    def _from_op(cls, data: np.ndarray, requires_grad: bool) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.name = None
        out.floor = None
        out.is_leaf = False
        out.grad = None
        out._requires_grad = requires_grad
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad.fill(0)

    def __repr__(self) -> str:
        label = f"'{self.name}', " if self.name else ""
        return f"Tensor({label}shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"


BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


@dataclass
class Node:
    """One recorded operation: inputs, output and the vector-Jacobian product."""
    op: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


class Tape:
    """Ordered record of operations, replayed in reverse by ``backward``."""

    def __init__(self):
        self.nodes: List[Node] = []

    def __enter__(self) -> "Tape":
        stack = getattr(_local, "stack", None)
        if stack is None:
            stack = _local.stack = []
        stack.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _local.stack.pop()

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, node: Node) -> None:
        self.nodes.append(node)

    def backward(self, loss: Tensor) -> None:
        """
        Accumulate d(loss)/d(leaf) into every reachable leaf's ``grad``.

        Args:
            loss: Scalar tensor produced by operations on this tape

        Raises:
            UsageError: If ``loss`` is not a scalar or does not require gradients
        """
        if loss.size != 1:
            raise UsageError(f"backward needs a scalar loss, got shape {loss.shape}")
        if not loss.requires_grad:
            raise UsageError("loss does not depend on any tensor that requires a gradient")

        seed = np.ones_like(loss.data)
        if loss.is_leaf:
            loss.grad += seed
            return

        pending = {id(loss): seed}
        for node in reversed(self.nodes):
            upstream = pending.pop(id(node.output), None)
            if upstream is None:
                continue
            for tensor, grad in zip(node.inputs, node.backward(upstream)):
                if grad is None or not tensor.requires_grad:
                    continue
                if grad.shape != tensor.shape:
                    raise ShapeError(
                        f"{node.op}: gradient shape {grad.shape} does not match input {tensor.shape}"
                    )
                if tensor.is_leaf:
                    tensor.grad += grad.astype(tensor.grad.dtype, copy=False)
                else:
                    key = id(tensor)
                    if key in pending:
                        pending[key] = pending[key] + grad
                    else:
                        pending[key] = grad
        logger.debug(f"Backward pass over {len(self.nodes)} recorded operations")


def active_tape() -> Optional[Tape]:
    """Return the innermost active tape of this thread, if any."""
    stack = getattr(_local, "stack", None)
    return stack[-1] if stack else None


def make_result(op: str, inputs: Sequence[Tensor], data: np.ndarray, backward: BackwardFn) -> Tensor:
    """Wrap an operation output and record it when a tape needs it."""
    tape = active_tape()
    needs_grad = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor._from_op(data, needs_grad)
    if needs_grad:
        tape.record(Node(op=op, inputs=tuple(inputs), output=out, backward=backward))
    return out


def backward(tape: Tape, loss: Tensor) -> None:
    """Functional alias for ``tape.backward(loss)``."""
    tape.backward(loss)
