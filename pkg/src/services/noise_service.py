"""Synthetic noise: AWGN and spatially variant (non-i.i.d.) Gaussian noise.

Noise is `y = x + g * M` with `g` standard normal and `M` a per-pixel
standard deviation map (a constant sigma for AWGN). Normals come from
Box-Muller over uniforms of a Philox counter-based generator keyed by
(seed, stream), so a draw depends only on its key and position and the
constant mask reproduces AWGN bit for bit.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from src.autograd import Tensor
from src.config.schema import NoiseSpec
from src.db.tensor_store import TensorStore
from src.utils.errors import ConfigurationError, FormatError

logger = logging.getLogger(__name__)

SIGMA_MIN = 5 / 255
SIGMA_MAX = 50 / 255


@dataclass
class NoiseMask:
    mask_id: str
    M: np.ndarray

    @property
    def shape(self) -> Tuple[int, int]:
        return self.M.shape

    def save(self, path: Union[str, Path]) -> None:
        store = TensorStore(metadata={"kind": "noise-mask", "mask_id": self.mask_id})
        store.add("mask", self.M)
        store.save(path)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "NoiseMask":
        store = TensorStore.load(path)
        if store.metadata.get("kind") != "noise-mask" or "mask" not in store:
            raise FormatError(f"{path} does not hold a noise mask")
        return cls(mask_id=store.metadata.get("mask_id", "unknown"), M=store.get("mask"))


def counter_normal(shape: Tuple[int, ...], seed: int, stream: int = 0) -> np.ndarray:
    """Standard normals (float64) for key (seed, stream) via Box-Muller."""
    if seed < 0 or stream < 0:
        raise ConfigurationError(f"noise seed and stream must be >= 0, got {seed}, {stream}")
    bits = np.random.Philox(key=np.array([seed, stream], dtype=np.uint64))
    u = np.random.Generator(bits).random((2,) + tuple(shape))
    radius = np.sqrt(-2.0 * np.log1p(-u[0]))
    return radius * np.cos(2.0 * np.pi * u[1])


def make_mask(mask_id: str, height: int, width: int, seed: int = 0, value: float = 25 / 255) -> NoiseMask:
    """Per-pixel sigma map with entries in [5/255, 50/255].

    `constant` is the debug mask filled with `value`.
    """
    if height < 8 or width < 8:
        raise ConfigurationError(f"mask needs H, W >= 8, got {height}x{width}")
    y, x = np.mgrid[0:height, 0:width].astype(np.float64)
    span = SIGMA_MAX - SIGMA_MIN

    if mask_id == "train":
        rng = np.random.default_rng(seed)
        cy, cx = rng.uniform(0, height), rng.uniform(0, width)
        spread = rng.uniform(0.15, 0.35) * max(height, width)
        M = SIGMA_MIN + span * np.exp(-((y - cy) ** 2 + (x - cx) ** 2) / (2 * spread ** 2))
    elif mask_id == "test1":
        spread = 0.25 * min(height, width)
        bump = np.exp(-((y - (height - 1) / 2) ** 2 + (x - (width - 1) / 2) ** 2) / (2 * spread ** 2))
        M = SIGMA_MAX - span * bump
    elif mask_id == "test2":
        M = SIGMA_MIN + span * x / (width - 1)
    elif mask_id == "test3":
        period = (height + width) / 4
        M = SIGMA_MIN + span * 0.5 * (1 + np.sin(2 * np.pi * (x + y) / period))
    elif mask_id == "constant":
        M = np.full((height, width), float(value))
    else:
        raise ConfigurationError(f"unknown mask id {mask_id!r}")
    return NoiseMask(mask_id=mask_id, M=M)


def noise_field(shape: Tuple[int, int, int, int], spec: NoiseSpec, stream: int = 0) -> np.ndarray:
    """The additive noise n (float64) for a B x C x H x W image batch."""
    g = counter_normal(shape, spec.seed, stream)
    if spec.kind == "awgn":
        return g * spec.sigma
    mask = make_mask(spec.mask_id, shape[2], shape[3], seed=spec.seed, value=spec.constant_value)
    return g * mask.M


def apply_noise(clean, spec: NoiseSpec, stream: int = 0) -> np.ndarray:
    """Noisy copy of `clean` (B x C x H x W); not clamped."""
    x = clean.data if isinstance(clean, Tensor) else np.asarray(clean)
    if x.ndim != 4:
        raise ConfigurationError(f"apply_noise expects B x C x H x W, got shape {x.shape}")
    if spec.kind == "awgn" and spec.sigma == 0:
        return x.copy()
    n = noise_field(x.shape, spec, stream)
    return (x + n.astype(x.dtype)).astype(x.dtype, copy=False)
