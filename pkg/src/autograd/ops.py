"""Elementwise, shape and reduction operations with their backward rules."""
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from src.autograd.tensor import Function, Tensor, to_tensor
from src.utils.errors import ConfigurationError

Operand = Union[Tensor, float, int, np.ndarray]


def _broadcast_shape(a: Tuple[int, ...], b: Tuple[int, ...], op: str) -> None:
    try:
        np.broadcast_shapes(a, b)
    except ValueError:
        raise ConfigurationError(f"{op}: incompatible shapes {a} and {b}") from None


class Add(Function):
    def forward(self, a, b):
        _broadcast_shape(a.shape, b.shape, "add")
        self.shapes = (a.shape, b.shape)
        return a + b

    def backward(self, grad):
        sa, sb = self.shapes
        return self.unbroadcast(grad, sa), self.unbroadcast(grad, sb)


class Sub(Function):
    def forward(self, a, b):
        _broadcast_shape(a.shape, b.shape, "sub")
        self.shapes = (a.shape, b.shape)
        return a - b

    def backward(self, grad):
        sa, sb = self.shapes
        return self.unbroadcast(grad, sa), self.unbroadcast(-grad, sb)


class Mul(Function):
    def forward(self, a, b):
        _broadcast_shape(a.shape, b.shape, "multiply")
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        return (
            self.unbroadcast(grad * self.b, self.a.shape),
            self.unbroadcast(grad * self.a, self.b.shape),
        )


def add(a: Operand, b: Operand) -> Tensor:
    a, b = _pair(a, b)
    return Add.apply(a, b)


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = _pair(a, b)
    return Sub.apply(a, b)


def multiply(a: Operand, b: Operand) -> Tensor:
    a, b = _pair(a, b)
    return Mul.apply(a, b)


def _pair(a: Operand, b: Operand) -> Tuple[Tensor, Tensor]:
    like = a if isinstance(a, Tensor) else b if isinstance(b, Tensor) else None
    return to_tensor(a, like), to_tensor(b, like)


class Concat(Function):
    def forward(self, *arrays, axis=1):
        ref = arrays[0].shape
        for arr in arrays[1:]:
            if arr.ndim != len(ref) or any(
                d != r for i, (d, r) in enumerate(zip(arr.shape, ref)) if i != axis % len(ref)
            ):
                raise ConfigurationError(f"concat: incompatible shapes {ref} and {arr.shape} on axis {axis}")
        self.axis = axis
        self.splits = np.cumsum([arr.shape[axis] for arr in arrays])[:-1]
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad):
        return np.split(grad, self.splits, axis=self.axis)


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    if not tensors:
        raise ConfigurationError("concat: no tensors given")
    return Concat.apply(*tensors, axis=axis)


class Reshape(Function):
    def forward(self, a, shape=()):
        try:
            out = a.reshape(shape)
        except ValueError:
            raise ConfigurationError(f"reshape: cannot reshape {a.shape} into {tuple(shape)}") from None
        self.in_shape = a.shape
        return out

    def backward(self, grad):
        return (grad.reshape(self.in_shape),)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    return Reshape.apply(a, shape=tuple(shape))


class Permute(Function):
    def forward(self, a, axes=()):
        if sorted(axes) != list(range(a.ndim)):
            raise ConfigurationError(f"permute: {tuple(axes)} is not a permutation of {a.ndim} axes")
        self.axes = tuple(axes)
        return np.ascontiguousarray(np.transpose(a, self.axes))

    def backward(self, grad):
        return (np.transpose(grad, np.argsort(self.axes)),)


def permute(a: Tensor, axes: Sequence[int]) -> Tensor:
    return Permute.apply(a, axes=tuple(axes))


class Mean(Function):
    def forward(self, a, axis=None):
        self.in_shape = a.shape
        self.axis = axis
        self.count = a.size if axis is None else int(np.prod([a.shape[i] for i in axis]))
        return np.mean(a, axis=axis)

    def backward(self, grad):
        if self.axis is not None:
            grad = np.expand_dims(grad, self.axis)
        return (np.broadcast_to(grad / self.count, self.in_shape).copy(),)


def mean(a: Tensor, axis: Optional[Sequence[int]] = None) -> Tensor:
    return Mean.apply(a, axis=None if axis is None else tuple(axis))


class Sum(Function):
    def forward(self, a):
        self.in_shape = a.shape
        return np.sum(a)

    def backward(self, grad):
        return (np.broadcast_to(grad, self.in_shape).copy(),)


def sum_all(a: Tensor) -> Tensor:
    return Sum.apply(a)


class Crop2d(Function):
    def forward(self, a, top=0, left=0, height=0, width=0):
        if a.ndim != 4:
            raise ConfigurationError(f"crop2d expects B x C x H x W, got {a.shape}")
        H, W = a.shape[2:]
        if top < 0 or left < 0 or height < 1 or width < 1 or top + height > H or left + width > W:
            raise ConfigurationError(f"crop2d window ({top},{left},{height},{width}) outside {H}x{W}")
        self.in_shape = a.shape
        self.window = (slice(top, top + height), slice(left, left + width))
        return a[:, :, self.window[0], self.window[1]].copy()

    def backward(self, grad):
        out = np.zeros(self.in_shape, dtype=grad.dtype)
        out[:, :, self.window[0], self.window[1]] = grad
        return (out,)


def crop2d(a: Tensor, top: int, left: int, height: int, width: int) -> Tensor:
    return Crop2d.apply(a, top=top, left=left, height=height, width=width)


class LeakyReLU(Function):
    def forward(self, x, negative_slope=0.2):
        if not 0.0 < negative_slope < 1.0:
            raise ConfigurationError(f"negative_slope must lie in (0, 1), got {negative_slope}")
        self.slope = np.where(x > 0, 1.0, negative_slope).astype(x.dtype)
        return x * self.slope

    def backward(self, grad):
        return (grad * self.slope,)

    def kink_signs(self):
        return self.slope == 1.0


def leaky_relu(x: Tensor, negative_slope: float = 0.2) -> Tensor:
    return LeakyReLU.apply(x, negative_slope=negative_slope)


class MatMul(Function):
    """Batched matrix product over the last two axes."""

    def forward(self, a, b):
        if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2] or a.shape[:-2] != b.shape[:-2]:
            raise ConfigurationError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
        self.a, self.b = a, b
        return np.matmul(a, b)

    def backward(self, grad):
        return (
            np.matmul(grad, np.swapaxes(self.b, -1, -2)),
            np.matmul(np.swapaxes(self.a, -1, -2), grad),
        )


def matmul(a: Tensor, b: Tensor) -> Tensor:
    return MatMul.apply(a, b)


class L1Loss(Function):
    def forward(self, pred, target):
        if pred.shape != target.shape:
            raise ConfigurationError(f"l1_loss: shape mismatch {pred.shape} vs {target.shape}")
        diff = pred - target
        # np.sign is 0 at exact ties, which is the chosen subgradient.
        self.sign = np.sign(diff)
        self.count = diff.size
        return np.mean(np.abs(diff))

    def backward(self, grad):
        g = grad * self.sign / self.count
        return g, -g

    def kink_signs(self):
        return self.sign


def l1_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean absolute error between prediction and target."""
    return L1Loss.apply(pred, target)
