"""Minimal deterministic tensor engine with reverse-mode differentiation."""
from src.autograd.conv import conv2d, conv_transpose2d
from src.autograd.linalg import batched_gram_solve
from src.autograd.ops import (
    add,
    concat,
    crop2d,
    l1_loss,
    leaky_relu,
    matmul,
    mean,
    multiply,
    permute,
    reshape,
    sub,
    sum_all,
)
from src.autograd.tensor import Function, GradTape, Tensor

__all__ = [
    "Function",
    "GradTape",
    "Tensor",
    "add",
    "batched_gram_solve",
    "concat",
    "conv2d",
    "conv_transpose2d",
    "crop2d",
    "l1_loss",
    "leaky_relu",
    "matmul",
    "mean",
    "multiply",
    "permute",
    "reshape",
    "sub",
    "sum_all",
]
