"""Subspace attention: basis generation and projection onto the signal subspace.

Given a low-level skip feature X1 and an upsampled decoder feature X2 of the
same shape, a small residual conv block turns (a selection of) them into K
basis maps, flattened row-major into V (B x N x K, N = H*W). One of the two
features is then replaced by its orthogonal projection onto span(V),
channel by channel. The `dot_product` variant drops the (V^T V)^{-1}
normalisation and computes V (V^T X) instead.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional

from src.autograd import Tensor, batched_gram_solve, concat, leaky_relu, matmul, permute, reshape
from src.config.schema import SsaConfig
from src.models.layers import ConvSpec, conv, conv_block, conv_block_specs
from src.utils.errors import ConfigurationError

logger = logging.getLogger(__name__)


@dataclass
class BasisSet:
    V: Tensor
    height: int
    width: int

    @property
    def K(self) -> int:
        return self.V.shape[2]

    def maps(self):
        """Basis vectors as a B x K x H x W array."""
        B, N, K = self.V.shape
        return self.V.data.transpose(0, 2, 1).reshape(B, K, self.height, self.width)


def basis_specs(prefix: str, channels: int, config: SsaConfig, scale: int, module: str = "ssa") -> List[ConvSpec]:
    cin = channels * config.basis_inputs
    if config.basis_block == "wide":
        return conv_block_specs(f"{prefix}basis.", cin, cin, scale, module) + [
            ConvSpec(f"{prefix}basis.head", cin, config.K, 3, 1, 1, scale=scale, module=module)
        ]
    return conv_block_specs(f"{prefix}basis.", cin, config.K, scale, module)


def _flatten(x: Tensor) -> Tensor:
    """B x C x H x W -> B x (H*W) x C, row-major over space."""
    B, C, H, W = x.shape
    return permute(reshape(x, (B, C, H * W)), (0, 2, 1))


def _unflatten(y: Tensor, height: int, width: int) -> Tensor:
    B, N, C = y.shape
    return reshape(permute(y, (0, 2, 1)), (B, C, height, width))


def generate_basis(
    X1: Tensor,
    X2: Tensor,
    params: Mapping[str, Tensor],
    config: SsaConfig,
    prefix: str = "",
    slope: float = 0.2,
) -> BasisSet:
    if X1.shape != X2.shape:
        raise ConfigurationError(f"SSA inputs differ in shape: {X1.shape} vs {X2.shape}")
    if config.basis_source == "x1_only":
        source = X1
    elif config.basis_source == "x2_only":
        source = X2
    else:
        source = concat([X1, X2], axis=1)

    if config.basis_block == "wide":
        h = conv_block(params, f"{prefix}basis.", source, slope)
        maps = conv(params, f"{prefix}basis.head", h, padding=1)
        if config.head_activation:
            maps = leaky_relu(maps, slope)
    else:
        maps = conv_block(params, f"{prefix}basis.", source, slope, final_activation=config.head_activation)

    B, K, H, W = maps.shape
    if K != config.K:
        raise ConfigurationError(f"basis block emits {K} maps, config expects K={config.K}")
    return BasisSet(V=_flatten(maps), height=H, width=W)


def project(basis: BasisSet, X: Tensor, eps: float = 0.0) -> Tensor:
    """Orthogonal projection of every channel of X onto span(V)."""
    B, C, H, W = X.shape
    if H * W != basis.V.shape[1] or B != basis.V.shape[0]:
        raise ConfigurationError(f"basis of shape {basis.V.shape} does not match feature {X.shape}")
    return _unflatten(batched_gram_solve(basis.V, _flatten(X), eps=eps), H, W)


def dot_product_project(basis: BasisSet, X: Tensor) -> Tensor:
    """V (V^T X): the projection without the Gram normalisation."""
    B, C, H, W = X.shape
    V = basis.V
    coeffs = matmul(permute(V, (0, 2, 1)), _flatten(X))
    return _unflatten(matmul(V, coeffs), H, W)


def ssa_forward(
    X1: Tensor,
    X2: Tensor,
    params: Mapping[str, Tensor],
    config: SsaConfig,
    prefix: str = "",
    slope: float = 0.2,
    capture: Optional[Dict[str, BasisSet]] = None,
) -> Tensor:
    """Replace the selected input by its reconstruction in the generated subspace.

    X1 is the low-level skip feature, X2 the upsampled high-level feature.
    """
    basis = generate_basis(X1, X2, params, config, prefix=prefix, slope=slope)
    if capture is not None:
        capture[prefix.rstrip(".")] = basis
    target = X1 if config.projected_input == "x1" else X2
    if config.variant == "dot_product":
        return dot_product_project(basis, target)
    return project(basis, target, eps=config.gram_eps)
