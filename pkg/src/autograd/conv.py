"""2-D convolution and 2x2 transposed convolution.

Forward passes gather sliding windows (im2col through a strided view) and
contract them with the kernel in a single tensordot; the input gradient is
scattered back tap by tap (col2im), which keeps the reduction order fixed.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.autograd.tensor import Function, Tensor
from src.utils.errors import ConfigurationError


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


class Conv2d(Function):
    def forward(self, x, weight, bias, stride=1, padding=0):
        if x.ndim != 4 or weight.ndim != 4:
            raise ConfigurationError(f"conv2d expects 4-D input and weight, got {x.shape} and {weight.shape}")
        B, C, H, W = x.shape
        O, Cw, kh, kw = weight.shape
        if C != Cw:
            raise ConfigurationError(f"conv2d: input has {C} channels but weight expects {Cw}")
        if bias.shape != (O,):
            raise ConfigurationError(f"conv2d: bias shape {bias.shape} != ({O},)")
        if stride < 1 or padding < 0:
            raise ConfigurationError(f"conv2d: invalid stride={stride} padding={padding}")
        if H + 2 * padding < kh or W + 2 * padding < kw:
            raise ConfigurationError(f"conv2d: kernel {kh}x{kw} larger than padded input {H}x{W} (pad {padding})")

        xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
        Ho = conv_output_size(H, kh, stride, padding)
        Wo = conv_output_size(W, kw, stride, padding)
        # (B, C, Ho, Wo, kh, kw)
        windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :Ho, :Wo]
        out = np.tensordot(windows, weight, axes=([1, 4, 5], [1, 2, 3]))  # (B, Ho, Wo, O)
        out = out.transpose(0, 3, 1, 2) + bias.reshape(1, O, 1, 1)

        self.windows = windows
        self.weight = weight
        self.stride = stride
        self.padding = padding
        self.padded_shape = xp.shape
        self.in_shape = x.shape
        return np.ascontiguousarray(out)

    def backward(self, grad):
        kh, kw = self.weight.shape[2:]
        s = self.stride
        Ho, Wo = grad.shape[2:]
        grad_w = np.tensordot(grad, self.windows, axes=([0, 2, 3], [0, 2, 3]))  # (O, C, kh, kw)
        grad_b = grad.sum(axis=(0, 2, 3))
        cols = np.tensordot(grad, self.weight, axes=([1], [0]))  # (B, Ho, Wo, C, kh, kw)
        cols = cols.transpose(0, 3, 1, 2, 4, 5)
        grad_xp = np.zeros(self.padded_shape, dtype=grad.dtype)
        for i in range(kh):
            for j in range(kw):
                grad_xp[:, :, i:i + s * Ho:s, j:j + s * Wo:s] += cols[..., i, j]
        p = self.padding
        H, W = self.in_shape[2:]
        grad_x = grad_xp[:, :, p:p + H, p:p + W]
        return grad_x, grad_w, grad_b


def conv2d(x: Tensor, weight: Tensor, bias: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of a B x Cin x H x W input with a Cout x Cin x kh x kw kernel plus bias."""
    return Conv2d.apply(x, weight, bias, stride=stride, padding=padding)


class ConvTranspose2d(Function):
    """Fractionally strided convolution for kernels equal to the stride.

    With kh == kw == stride the output taps never overlap, so every input
    pixel is scattered into its own stride x stride output cell.
    """

    def forward(self, x, weight, bias, stride=2):
        if x.ndim != 4 or weight.ndim != 4:
            raise ConfigurationError(
                f"conv_transpose2d expects 4-D input and weight, got {x.shape} and {weight.shape}"
            )
        B, C, H, W = x.shape
        Cw, O, kh, kw = weight.shape
        if C != Cw:
            raise ConfigurationError(f"conv_transpose2d: input has {C} channels but weight expects {Cw}")
        if not (kh == kw == stride):
            raise ConfigurationError(
                f"conv_transpose2d supports kernel == stride only, got kernel {kh}x{kw} stride {stride}"
            )
        if bias.shape != (O,):
            raise ConfigurationError(f"conv_transpose2d: bias shape {bias.shape} != ({O},)")
        out = np.tensordot(x, weight, axes=([1], [0]))  # (B, H, W, O, kh, kw)
        out = out.transpose(0, 3, 1, 4, 2, 5).reshape(B, O, H * kh, W * kw)
        self.x = x
        self.weight = weight
        return out + bias.reshape(1, O, 1, 1)

    def backward(self, grad):
        B, C, H, W = self.x.shape
        _, O, kh, kw = self.weight.shape
        g = grad.reshape(B, O, H, kh, W, kw)
        grad_x = np.tensordot(g, self.weight, axes=([1, 3, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
        grad_w = np.tensordot(self.x, g, axes=([0, 2, 3], [0, 2, 4]))  # (C, O, kh, kw)
        grad_b = grad.sum(axis=(0, 2, 3))
        return np.ascontiguousarray(grad_x), grad_w, grad_b


def conv_transpose2d(x: Tensor, weight: Tensor, bias: Tensor, stride: int = 2) -> Tensor:
    return ConvTranspose2d.apply(x, weight, bias, stride=stride)
