"""The NBNet denoiser: a UNet whose skip connections pass through subspace attention.

Layout (S = config.stages, c_s = base_channels * 2**s)::

    encoder s:   blocks_per_stage ConvBlocks (first c_in -> c_s), 4x4/2 conv c_s -> c_s
    bottleneck:  blocks_per_stage ConvBlocks c_{S-1} -> c_S
    decoder s:   2x2/2 transposed conv c_{s+1} -> c_s
                 [skip ConvBlock c_s -> c_s]
                 [SSA: project skip onto the basis generated from (skip, upsampled)]
                 fusion: concat + ConvBlock 2c_s -> c_s, or sum
                 blocks_per_stage ConvBlocks c_s -> c_s
    output:      linear 3x3 conv c_0 -> in_channels, added to the noisy input

Resampling convolutions carry no activation.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional

import numpy as np

from src.autograd import Tensor, add, concat
from src.config.schema import NetworkConfig
from src.models.layers import LINEAR_SCALE, OUTPUT_SCALE, ConvSpec, conv, conv_block, conv_block_specs, deconv, init_params
from src.models.ssa import BasisSet, basis_specs, ssa_forward
from src.utils.errors import ConfigurationError

logger = logging.getLogger(__name__)


@dataclass
class TrainState:
    """Parameters, Adam moments and counters of one network."""

    config: NetworkConfig
    params: Dict[str, np.ndarray]
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    seed: int = 0

    def __post_init__(self):
        if not self.m:
            self.m = {k: np.zeros_like(p) for k, p in self.params.items()}
        if not self.v:
            self.v = {k: np.zeros_like(p) for k, p in self.params.items()}
        if set(self.m) != set(self.params) or set(self.v) != set(self.params):
            raise ConfigurationError("parameter and moment name sets differ")
        if self.step < 0:
            raise ConfigurationError(f"step must be >= 0, got {self.step}")

    @property
    def param_count(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    @property
    def dtype(self):
        return next(iter(self.params.values())).dtype

    def tensors(self, requires_grad: bool = False) -> Dict[str, Tensor]:
        return {k: Tensor(p, requires_grad=requires_grad, name=k) for k, p in self.params.items()}

    def copy(self) -> "TrainState":
        return TrainState(
            config=self.config,
            params={k: p.copy() for k, p in self.params.items()},
            m={k: a.copy() for k, a in self.m.items()},
            v={k: a.copy() for k, a in self.v.items()},
            step=self.step,
            seed=self.seed,
        )


def network_layout(config: NetworkConfig) -> List[ConvSpec]:
    """Every learnable convolution of the network, in forward order."""
    S, bps = config.stages, config.blocks_per_stage
    specs: List[ConvSpec] = []
    cin = config.in_channels
    for s in range(S):
        c, scale = config.channels(s), 2 ** s
        for j in range(bps):
            specs += conv_block_specs(f"enc{s}.block{j}.", cin if j == 0 else c, c, scale, "encoder")
        specs.append(ConvSpec(f"enc{s}.down", c, c, 4, 2, 1, scale=2 * scale, module="encoder"))
        cin = c

    for j in range(bps):
        c_in = config.channels(S - 1) if j == 0 else config.channels(S)
        specs += conv_block_specs(f"bottom.block{j}.", c_in, config.channels(S), 2 ** S, "bottleneck")

    for s in reversed(range(S)):
        c, scale = config.channels(s), 2 ** s
        specs.append(ConvSpec(f"dec{s}.up", config.channels(s + 1), c, 2, 2, 0, transposed=True,
                              scale=scale, module="upsample"))
        if config.skip_blocks:
            specs += conv_block_specs(f"dec{s}.skipblock.", c, c, scale, "skip_blocks")
        if config.ssa.enabled:
            specs += basis_specs(f"dec{s}.ssa.", c, config.ssa, scale)
        if config.fusion == "concat_conv":
            specs += conv_block_specs(f"dec{s}.fuse.", 2 * c, c, scale, "fusion")
        for j in range(bps):
            specs += conv_block_specs(f"dec{s}.block{j}.", c, c, scale, "decoder_blocks")

    specs.append(ConvSpec("out", config.base_channels, config.in_channels, 3, 1, 1, module="output"))
    return specs


def build(config: NetworkConfig, seed: int = 0, dtype=np.float32) -> TrainState:
    """Initialise all parameters: He-normal weights, zero biases."""
    rng = np.random.default_rng(seed)
    params = init_params(network_layout(config), rng, dtype=dtype)
    state = TrainState(config=config, params=params, seed=seed)
    logger.info("built network: %d parameters, %d tensors (seed=%d)", state.param_count, len(params), seed)
    return state


def run_network(
    config: NetworkConfig,
    params: Mapping[str, Tensor],
    noisy: Tensor,
    capture: Optional[Dict[str, BasisSet]] = None,
) -> Tensor:
    """Differentiable forward pass over an explicit parameter mapping."""
    if noisy.ndim != 4 or noisy.shape[1] != config.in_channels:
        raise ConfigurationError(
            f"expected a B x {config.in_channels} x H x W input, got shape {noisy.shape}"
        )
    config.check_input_shape(noisy.shape[2], noisy.shape[3])
    slope = config.leaky_slope
    S, bps = config.stages, config.blocks_per_stage

    x = noisy
    skips: List[Tensor] = []
    for s in range(S):
        for j in range(bps):
            x = conv_block(params, f"enc{s}.block{j}.", x, slope)
        skips.append(x)
        x = conv(params, f"enc{s}.down", x, stride=2, padding=1, scale=LINEAR_SCALE)

    for j in range(bps):
        x = conv_block(params, f"bottom.block{j}.", x, slope)

    for s in reversed(range(S)):
        up = deconv(params, f"dec{s}.up", x)
        skip = skips[s]
        if config.skip_blocks:
            skip = conv_block(params, f"dec{s}.skipblock.", skip, slope)
        if config.ssa.enabled:
            skip = ssa_forward(skip, up, params, config.ssa, prefix=f"dec{s}.ssa.", slope=slope, capture=capture)
        if config.fusion == "concat_conv":
            x = conv_block(params, f"dec{s}.fuse.", concat([skip, up], axis=1), slope)
        else:
            x = add(skip, up)
        for j in range(bps):
            x = conv_block(params, f"dec{s}.block{j}.", x, slope)

    return add(noisy, conv(params, "out", x, padding=1, scale=OUTPUT_SCALE))


def forward(state: TrainState, noisy) -> Tensor:
    """Inference with frozen parameters; accepts a Tensor or an array."""
    x = noisy if isinstance(noisy, Tensor) else Tensor(np.asarray(noisy, dtype=state.dtype))
    return run_network(state.config, state.tensors(), x)


def capture_basis(state: TrainState, noisy) -> Dict[str, BasisSet]:
    """Run inference and return the basis of every SSA layer, keyed `dec<stage>.ssa`."""
    if not state.config.ssa.enabled:
        raise ConfigurationError("network has no SSA layers")
    x = noisy if isinstance(noisy, Tensor) else Tensor(np.asarray(noisy, dtype=state.dtype))
    captured: Dict[str, BasisSet] = {}
    run_network(state.config, state.tensors(), x, capture=captured)
    return captured


def translation_gap(state: TrainState, noisy) -> float:
    """Max abs difference between f(shift(x)) shifted back and f(x).

    The shift is 2**stages pixels along rows with wrap-around. Zero padding
    breaks exact equivariance near the borders, so the value is a diagnostic.
    """
    x = np.asarray(noisy.data if isinstance(noisy, Tensor) else noisy, dtype=state.dtype)
    shift = 2 ** state.config.stages
    base = forward(state, x).data
    moved = forward(state, np.roll(x, shift, axis=2)).data
    gap = float(np.max(np.abs(np.roll(moved, -shift, axis=2) - base)))
    logger.info("translation gap (shift %d): %.4e", shift, gap)
    return gap
