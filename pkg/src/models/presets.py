"""Named network configurations for the ablations and desk-scale experiments."""
from dataclasses import dataclass, replace
from typing import Dict, Optional

from src.config.schema import NetworkConfig, NoiseSpec, SsaConfig, TrainConfig
from src.utils.errors import ConfigurationError

_BASE = NetworkConfig()

# (projected_input, basis_source) of every Proj(a, b) row.
_PROJECTIONS = {
    "proj_x1_given_x1": ("x1", "x1_only"),
    "proj_x1_given_x2": ("x1", "x2_only"),
    "proj_x2_given_x2": ("x2", "x2_only"),
    "proj_x2_given_x1": ("x2", "x1_only"),
    "proj_x2_given_x1x2": ("x2", "x1_and_x2"),
    "proj_x1_given_x1x2": ("x1", "x1_and_x2"),
}


def ablation_presets() -> Dict[str, NetworkConfig]:
    presets = {
        "unet_plain": replace(_BASE, skip_blocks=False, ssa=replace(_BASE.ssa, enabled=False)),
        "unet_ssa": replace(_BASE, skip_blocks=False),
        "unet_blocks": replace(_BASE, ssa=replace(_BASE.ssa, enabled=False)),
        "unet_blocks_ssa": _BASE,
        "k1": _BASE.with_ssa(K=1),
        "k8": _BASE.with_ssa(K=8),
        "k16": _BASE.with_ssa(K=16),
        "dotprod": _BASE.with_ssa(variant="dot_product"),
        "fusion_add": replace(_BASE, fusion="add"),
    }
    for name, (projected, source) in _PROJECTIONS.items():
        presets[name] = _BASE.with_ssa(projected_input=projected, basis_source=source)
    return presets


@dataclass(frozen=True)
class Experiment:
    """A desk-scale run: network, schedule, noise and the toy corpus to draw."""

    net: NetworkConfig
    train: TrainConfig
    noise: NoiseSpec
    train_images: int
    val_images: int
    image_size: int
    description: str = ""


_TINY_NET = NetworkConfig(stages=2, base_channels=8, ssa=SsaConfig(K=4))


def experiment_presets() -> Dict[str, Experiment]:
    awgn25 = NoiseSpec(kind="awgn", sigma=25 / 255)
    tiny_train = TrainConfig(lr0=1e-3, total_iters=20_000, batch=8, patch=32, eval_every=1000,
                             checkpoint_every=5000)
    return {
        "overfit1": Experiment(
            net=_TINY_NET,
            train=TrainConfig(lr0=1e-3, total_iters=2000, batch=1, patch=64, eval_every=500,
                              checkpoint_every=1000, augment_rotate=False, augment_flip=False,
                              freeze_noise=True),
            noise=awgn25,
            train_images=1,
            val_images=0,
            image_size=64,
            description="memorise one frozen noisy 64x64 patch",
        ),
        "tiny-awgn": Experiment(
            net=_TINY_NET, train=tiny_train, noise=awgn25, train_images=20, val_images=5, image_size=64,
            description="20 toy images, sigma=25, held-out validation",
        ),
        "tiny-awgn-k1": Experiment(
            net=_TINY_NET.with_ssa(K=1), train=tiny_train, noise=awgn25, train_images=20, val_images=5,
            image_size=64, description="tiny-awgn with a one-dimensional subspace",
        ),
    }


def resolve_network(name: str) -> NetworkConfig:
    """Network config of an ablation or experiment preset."""
    ablations = ablation_presets()
    if name in ablations:
        return ablations[name]
    experiments = experiment_presets()
    if name in experiments:
        return experiments[name].net
    raise ConfigurationError(f"unknown preset {name!r}; see `presets`")


def find_experiment(name: str) -> Optional[Experiment]:
    return experiment_presets().get(name)
