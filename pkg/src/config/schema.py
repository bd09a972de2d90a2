"""Typed run configuration: network, SSA, training and noise descriptions.

Each config is a dataclass that validates itself on construction and
round-trips through plain dicts (and hence JSON files and checkpoint
records).
"""
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from src.config import settings
from src.utils.errors import ConfigurationError

SSA_VARIANTS = ("projection", "dot_product")
BASIS_SOURCES = ("x1_only", "x2_only", "x1_and_x2")
PROJECTED_INPUTS = ("x1", "x2")
BASIS_BLOCKS = ("residual", "wide")
FUSIONS = ("concat_conv", "add")
NOISE_KINDS = ("awgn", "noniid")
MASK_IDS = ("train", "test1", "test2", "test3")
DEBUG_MASK_IDS = ("constant",)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigurationError(message)


def _choice(value: str, allowed: Tuple[str, ...], name: str) -> None:
    _require(value in allowed, f"{name} must be one of {allowed}, got {value!r}")


def _known(cls, data: Dict[str, Any]) -> Dict[str, Any]:
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    _require(not unknown, f"unknown {cls.__name__} keys: {unknown}")
    return dict(data)


@dataclass(frozen=True)
class SsaConfig:
    K: int = 16
    variant: str = "projection"
    basis_source: str = "x1_and_x2"
    projected_input: str = "x1"
    enabled: bool = True
    head_activation: bool = False
    basis_block: str = "residual"
    gram_eps: float = settings.GRAM_EPS

    def __post_init__(self):
        _require(self.K >= 1, f"K must be >= 1, got {self.K}")
        _choice(self.variant, SSA_VARIANTS, "ssa.variant")
        _choice(self.basis_source, BASIS_SOURCES, "ssa.basis_source")
        _choice(self.projected_input, PROJECTED_INPUTS, "ssa.projected_input")
        _choice(self.basis_block, BASIS_BLOCKS, "ssa.basis_block")
        _require(self.gram_eps >= 0.0, f"gram_eps must be >= 0, got {self.gram_eps}")

    @property
    def basis_inputs(self) -> int:
        """Number of feature maps concatenated for basis generation."""
        return 2 if self.basis_source == "x1_and_x2" else 1

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SsaConfig":
        return cls(**_known(cls, data))


@dataclass(frozen=True)
class NetworkConfig:
    stages: int = 4
    base_channels: int = 32
    blocks_per_stage: int = 1
    skip_blocks: bool = True
    fusion: str = "concat_conv"
    in_channels: int = 3
    leaky_slope: float = settings.LEAKY_SLOPE
    ssa: SsaConfig = field(default_factory=SsaConfig)

    def __post_init__(self):
        _require(self.stages >= 1, f"stages must be >= 1, got {self.stages}")
        _require(self.base_channels >= 1, f"base_channels must be >= 1, got {self.base_channels}")
        _require(self.blocks_per_stage >= 1, f"blocks_per_stage must be >= 1, got {self.blocks_per_stage}")
        _require(self.in_channels >= 1, f"in_channels must be >= 1, got {self.in_channels}")
        _require(0.0 < self.leaky_slope < 1.0, f"leaky_slope must lie in (0, 1), got {self.leaky_slope}")
        _choice(self.fusion, FUSIONS, "fusion")
        if self.ssa.enabled:
            _require(
                self.ssa.K < self.base_channels,
                f"K={self.ssa.K} must be smaller than base_channels={self.base_channels}",
            )

    @property
    def K(self) -> int:
        return self.ssa.K

    def channels(self, stage: int) -> int:
        return self.base_channels * 2 ** stage

    def check_input_shape(self, height: int, width: int) -> None:
        factor = 2 ** self.stages
        if height % factor or width % factor:
            raise ConfigurationError(
                f"input size {height}x{width} is not divisible by 2^stages={factor}"
            )

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["ssa"] = self.ssa.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "NetworkConfig":
        data = dict(data)
        ssa = dict(data.pop("ssa", {}) or {})
        if "K" in data:
            ssa["K"] = data.pop("K")
        return cls(ssa=SsaConfig.from_dict(ssa), **_known(cls, data))

    def with_ssa(self, **changes) -> "NetworkConfig":
        return replace(self, ssa=replace(self.ssa, **changes))


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 2e-4
    betas: Tuple[float, float] = (0.9, 0.999)
    eps_adam: float = 1e-8
    eta_min: float = 0.0
    total_iters: int = 700_000
    batch: int = 32
    patch: int = 128
    seed: int = settings.SEED
    eval_every: int = 1000
    checkpoint_every: int = 5000
    augment_rotate: bool = True
    augment_flip: bool = True
    freeze_noise: bool = False
    clip_norm: Optional[float] = None

    def __post_init__(self):
        _require(self.lr0 > 0, f"lr0 must be > 0, got {self.lr0}")
        _require(0 <= self.eta_min <= self.lr0, f"eta_min must lie in [0, lr0], got {self.eta_min}")
        _require(len(self.betas) == 2 and all(0 <= b < 1 for b in self.betas), f"invalid betas {self.betas}")
        _require(self.eps_adam > 0, f"eps_adam must be > 0, got {self.eps_adam}")
        _require(self.total_iters >= 0, f"total_iters must be >= 0, got {self.total_iters}")
        _require(self.batch >= 1, f"batch must be >= 1, got {self.batch}")
        _require(self.patch >= 1, f"patch must be >= 1, got {self.patch}")
        _require(self.eval_every >= 0, f"eval_every must be >= 0, got {self.eval_every}")
        _require(self.clip_norm is None or self.clip_norm > 0, f"clip_norm must be > 0, got {self.clip_norm}")
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))

    def validate_for(self, net: NetworkConfig) -> None:
        factor = 2 ** net.stages
        _require(self.patch % factor == 0, f"patch {self.patch} is not divisible by 2^stages={factor}")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["betas"] = list(self.betas)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainConfig":
        data = _known(cls, data)
        if "betas" in data:
            data["betas"] = tuple(data["betas"])
        return cls(**data)


@dataclass(frozen=True)
class NoiseSpec:
    """A synthetic noise process.

    `sigma` is expressed in [0, 1] image units. The `debug` flag unlocks the
    degenerate settings used by tests: sigma == 0 and the constant mask.
    """

    kind: str = "awgn"
    sigma: float = 25 / 255
    mask_id: str = "train"
    seed: int = 0
    debug: bool = False
    constant_value: float = 25 / 255

    def __post_init__(self):
        _choice(self.kind, NOISE_KINDS, "noise.kind")
        if self.kind == "awgn":
            _require(math.isfinite(self.sigma), "sigma must be finite")
            if self.debug:
                _require(self.sigma >= 0, f"sigma must be >= 0, got {self.sigma}")
            else:
                _require(self.sigma > 0, f"sigma must be > 0 for awgn, got {self.sigma}")
        else:
            allowed = MASK_IDS + DEBUG_MASK_IDS if self.debug else MASK_IDS
            _choice(self.mask_id, allowed, "noise.mask_id")
            _require(self.constant_value > 0, "constant mask value must be > 0")

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "NoiseSpec":
        """Parse the CLI form `awgn:<sigma in 8-bit units>` or `noniid:<mask_id>`."""
        kind, sep, arg = text.partition(":")
        _require(bool(sep), f"noise spec must look like 'awgn:25' or 'noniid:train', got {text!r}")
        if kind == "awgn":
            try:
                sigma = float(arg) / 255.0
            except ValueError:
                raise ConfigurationError(f"invalid awgn sigma {arg!r}") from None
            return cls(kind="awgn", sigma=sigma, seed=seed)
        if kind == "noniid":
            return cls(kind="noniid", mask_id=arg, seed=seed)
        raise ConfigurationError(f"unknown noise kind {kind!r}")

    def describe(self) -> str:
        if self.kind == "awgn":
            return f"awgn:{self.sigma * 255:g}"
        return f"noniid:{self.mask_id}"

    def with_seed(self, seed: int) -> "NoiseSpec":
        return replace(self, seed=seed)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "NoiseSpec":
        return cls(**_known(cls, data))


def load_json(path: Union[str, Path]) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path}: invalid JSON ({e})") from None
