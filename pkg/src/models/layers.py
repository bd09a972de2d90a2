"""Convolution layer descriptions, He initialisation and the residual ConvBlock.

Parameters are plain name -> array mappings. Every learnable convolution is
described by a `ConvSpec`; building a network means instantiating the specs
of its layout, and cost accounting walks the same specs.
"""
from dataclasses import dataclass
from typing import Dict, List, Mapping

import numpy as np

from src.autograd import Tensor, add, conv2d, conv_transpose2d, leaky_relu, multiply

# Forward-time multipliers on the He-normal weights. He weights keep feature
# energy only ahead of a LeakyReLU; linear convs, residual branches and the
# output conv are scaled so activations and the initial residual stay O(1).
LINEAR_SCALE = 2.0 ** -0.5
BRANCH_SCALE = 0.3
OUTPUT_SCALE = 0.2


@dataclass(frozen=True)
class ConvSpec:
    name: str
    cin: int
    cout: int
    kernel: int
    stride: int = 1
    padding: int = 0
    transposed: bool = False
    # Downsampling factor of this layer's output relative to the network input.
    scale: int = 1
    module: str = ""

    @property
    def weight_shape(self):
        if self.transposed:
            return (self.cin, self.cout, self.kernel, self.kernel)
        return (self.cout, self.cin, self.kernel, self.kernel)

    @property
    def fan_in(self) -> int:
        # kernel == stride for transposed convs: each output sums cin inputs.
        return self.cin if self.transposed else self.cin * self.kernel * self.kernel

    @property
    def param_count(self) -> int:
        return int(np.prod(self.weight_shape)) + self.cout

    def macs(self, height: int, width: int) -> int:
        """Multiply-accumulates for an input image of height x width."""
        # kernel == stride for transposed convs: one tap per output pixel.
        taps = 1 if self.transposed else self.kernel
        return conv_macs(self.cin, self.cout, taps, height // self.scale, width // self.scale)


def conv_macs(cin: int, cout: int, kernel: int, out_height: int, out_width: int) -> int:
    return cout * cin * kernel * kernel * out_height * out_width


def conv_block_specs(prefix: str, cin: int, cout: int, scale: int, module: str) -> List[ConvSpec]:
    """Two 3x3 convolutions plus a 1x1 projection when the width changes."""
    specs = [
        ConvSpec(f"{prefix}conv1", cin, cout, 3, 1, 1, scale=scale, module=module),
        ConvSpec(f"{prefix}conv2", cout, cout, 3, 1, 1, scale=scale, module=module),
    ]
    if cin != cout:
        specs.append(ConvSpec(f"{prefix}proj", cin, cout, 1, 1, 0, scale=scale, module=module))
    return specs


def init_params(specs: List[ConvSpec], rng: np.random.Generator, dtype=np.float32) -> Dict[str, np.ndarray]:
    """Zero-mean Gaussian weights with variance 2 / fan_in, zero biases."""
    params: Dict[str, np.ndarray] = {}
    for spec in specs:
        std = np.sqrt(2.0 / spec.fan_in)
        params[f"{spec.name}.weight"] = (rng.standard_normal(spec.weight_shape) * std).astype(dtype)
        params[f"{spec.name}.bias"] = np.zeros(spec.cout, dtype=dtype)
    return params


def _weight(params: Mapping[str, Tensor], name: str, scale: float) -> Tensor:
    w = params[f"{name}.weight"]
    return w if scale == 1.0 else multiply(w, scale)


def conv(
    params: Mapping[str, Tensor],
    name: str,
    x: Tensor,
    stride: int = 1,
    padding: int = 0,
    scale: float = 1.0,
) -> Tensor:
    return conv2d(x, _weight(params, name, scale), params[f"{name}.bias"], stride=stride, padding=padding)


def deconv(params: Mapping[str, Tensor], name: str, x: Tensor, scale: float = LINEAR_SCALE) -> Tensor:
    return conv_transpose2d(x, _weight(params, name, scale), params[f"{name}.bias"], stride=2)


def conv_block(
    params: Mapping[str, Tensor],
    prefix: str,
    x: Tensor,
    slope: float,
    final_activation: bool = True,
) -> Tensor:
    h = leaky_relu(conv(params, f"{prefix}conv1", x, padding=1), slope)
    h = conv(params, f"{prefix}conv2", h, padding=1, scale=BRANCH_SCALE)
    if final_activation:
        h = leaky_relu(h, slope)
    skip = conv(params, f"{prefix}proj", x, scale=LINEAR_SCALE) if f"{prefix}proj.weight" in params else x
    return add(h, skip)
