"""Tensor container and the gradient tape that records differentiable ops.

A `Tensor` wraps a numpy array (float32 by default, float64 kept as-is for
verification). Operations are `Function` subclasses; when a `GradTape` is
active and one of the inputs is tracked, the executed node is appended to
the tape. `GradTape.gradient` replays the nodes in exact reverse execution
order and accumulates vector-Jacobian products additively.
"""
import logging
import threading
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.utils.errors import ConfigurationError, NumericalError

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, float, int, Sequence[float]]

_FLOAT_TYPES = (np.float32, np.float64)


def as_float_array(data: ArrayLike, dtype=None) -> np.ndarray:
    """Convert to a float array, keeping float64 input in 64-bit mode."""
    if dtype is not None:
        return np.asarray(data, dtype=dtype)
    arr = np.asarray(data)
    if arr.dtype.type in _FLOAT_TYPES:
        return arr
    return arr.astype(np.float32)


class Tensor:
    """N-dimensional float array that doubles as a differentiable variable."""

    __slots__ = ("data", "requires_grad", "name")

    def __init__(self, data: ArrayLike, requires_grad: bool = False, dtype=None, name: Optional[str] = None):
        if isinstance(data, Tensor):
            data = data.data
        self.data = as_float_array(data, dtype)
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ConfigurationError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def astype(self, dtype) -> "Tensor":
        return Tensor(self.data.astype(dtype), requires_grad=self.requires_grad, name=self.name)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label})"

    # Arithmetic sugar; the ops themselves live in `ops`.
    def __add__(self, other):
        from src.autograd import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from src.autograd import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from src.autograd import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from src.autograd import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from src.autograd import ops
        return ops.multiply(self, other)

    def __rmul__(self, other):
        from src.autograd import ops
        return ops.multiply(other, self)

    def __neg__(self):
        from src.autograd import ops
        return ops.multiply(self, -1.0)

    def __matmul__(self, other):
        from src.autograd import ops
        return ops.matmul(self, other)


def to_tensor(value: Union[Tensor, ArrayLike], like: Optional[Tensor] = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(value, dtype=dtype)


class Function:
    """Base class for differentiable operations.

    Subclasses implement `forward` on raw arrays and `backward`, which maps
    the gradient w.r.t. the output to one gradient (or None) per input.
    Anything needed by `backward` is stashed on `self` during `forward`.
    """

    def __init__(self, *inputs: Tensor):
        self.inputs = inputs
        self.output: Optional[Tensor] = None
        self.index = -1

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__}.forward")

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        raise NotImplementedError(f"{type(self).__name__}.backward")

    def kink_signs(self) -> Optional[np.ndarray]:
        """Branch taken per element by piecewise-linear ops, None for smooth ones."""
        return None

    @classmethod
    def apply(cls, *inputs: Tensor, **kwargs: Any) -> Tensor:
        node = cls(*inputs)
        out = np.asarray(node.forward(*(t.data for t in inputs), **kwargs))
        if not np.all(np.isfinite(out)):
            raise NumericalError(f"{cls.__name__} produced non-finite values")
        out.flags.writeable = False
        tapes = [tape for tape in _active_tapes() if any(tape.tracks(t) for t in inputs)]
        result = Tensor(out, requires_grad=bool(tapes))
        node.output = result
        for tape in tapes:
            tape.record(node)
        return result

    @staticmethod
    def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
        """Sum out broadcast dimensions so `grad` matches `shape`."""
        if grad.shape == shape:
            return grad
        while grad.ndim > len(shape):
            grad = grad.sum(axis=0)
        for dim, size in enumerate(shape):
            if size == 1 and grad.shape[dim] != 1:
                grad = grad.sum(axis=dim, keepdims=True)
        return grad


_local = threading.local()


def _active_tapes() -> List["GradTape"]:
    stack = getattr(_local, "tapes", None)
    if stack is None:
        stack = _local.tapes = []
    return stack


class GradTape:
    """Ordered record of executed operations, replayed backward on demand.

    Usage mirrors a gradient-tape API::

        with GradTape() as tape:
            loss = l1_loss(model(x), y)
        grads = tape.gradient(loss, params)

    Tensors with `requires_grad=True`, tensors passed to `watch`, and outputs
    of recorded nodes are tracked. A non-persistent tape is cleared after the
    first `gradient` call.
    """

    def __init__(self, persistent: bool = False):
        self.persistent = persistent
        self._nodes: List[Function] = []
        self._watched: Dict[int, Tensor] = {}
        self._produced: Dict[int, Tensor] = {}

    def __enter__(self) -> "GradTape":
        _active_tapes().append(self)
        return self

    def __exit__(self, *exc) -> None:
        stack = _active_tapes()
        if stack and stack[-1] is self:
            stack.pop()
        elif self in stack:
            stack.remove(self)

    def __len__(self) -> int:
        return len(self._nodes)

    @property
    def operations(self) -> List[str]:
        return [type(node).__name__ for node in self._nodes]

    def watch(self, *tensors: Tensor) -> None:
        for t in tensors:
            self._watched[id(t)] = t

    def tracks(self, t: Tensor) -> bool:
        return t.requires_grad or id(t) in self._watched or id(t) in self._produced

    def kink_pattern(self) -> np.ndarray:
        """Concatenated branch signs of every recorded piecewise op, in execution order."""
        parts = [np.asarray(s, dtype=np.int8).reshape(-1) for s in (n.kink_signs() for n in self._nodes) if s is not None]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int8)

    def record(self, node: Function) -> None:
        node.index = len(self._nodes)
        self._nodes.append(node)
        self._produced[id(node.output)] = node.output

    def gradient(
        self,
        target: Tensor,
        sources: Iterable[Tensor],
        output_gradient: Optional[np.ndarray] = None,
    ) -> List[np.ndarray]:
        """Return d(target)/d(source) for every source, zeros where unreachable."""
        sources = list(sources)
        if output_gradient is None:
            if target.size != 1:
                raise ConfigurationError(f"gradient of non-scalar target {target.shape} needs output_gradient")
            seed = np.ones_like(target.data)
        else:
            seed = as_float_array(output_gradient, target.dtype)
            if seed.shape != target.shape:
                raise ConfigurationError(f"output_gradient shape {seed.shape} != target shape {target.shape}")

        grads: Dict[int, np.ndarray] = {id(target): seed}
        for node in reversed(self._nodes):
            grad_out = grads.get(id(node.output))
            if grad_out is None:
                continue
            for t, g in zip(node.inputs, node.backward(grad_out)):
                if g is None or not self.tracks(t):
                    continue
                key = id(t)
                grads[key] = grads[key] + g if key in grads else g

        result = []
        for s in sources:
            g = grads.get(id(s))
            result.append(np.zeros_like(s.data) if g is None else np.asarray(g, dtype=s.dtype).reshape(s.shape))
        if not self.persistent:
            self.reset()
        return result

    def reset(self) -> None:
        self._nodes.clear()
        self._produced.clear()
