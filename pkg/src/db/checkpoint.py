"""Checkpoint persistence for `TrainState` on top of the tensor container.

Tensor names: `param/<name>`, `adam_m/<name>`, `adam_v/<name>`. The metadata
record holds the format tag, step, seed, the network config and optionally
the train config and noise spec of the run.
"""
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

from src.config.schema import NetworkConfig
from src.db.tensor_store import TensorStore
from src.models.nbnet import TrainState, network_layout
from src.utils.errors import FormatError

logger = logging.getLogger(__name__)

FORMAT_TAG = "nbnet-checkpoint"
CHECKPOINT_VERSION = 1


def save_checkpoint(state: TrainState, path: Union[str, Path], extra: Optional[Dict[str, Any]] = None) -> Path:
    store = TensorStore(
        metadata={
            "format": FORMAT_TAG,
            "version": CHECKPOINT_VERSION,
            "step": int(state.step),
            "seed": int(state.seed),
            "network": state.config.to_dict(),
            **(extra or {}),
        }
    )
    store.update(state.params, prefix="param/")
    store.update(state.m, prefix="adam_m/")
    store.update(state.v, prefix="adam_v/")
    store.save(path)
    logger.info("saved checkpoint step=%d to %s", state.step, path)
    return Path(path)


def _check_layout(path, config: NetworkConfig, params: Dict[str, Any]) -> None:
    """Parameter names and shapes must match the layout of the stored config."""
    expected = {}
    for spec in network_layout(config):
        expected[f"{spec.name}.weight"] = tuple(spec.weight_shape)
        expected[f"{spec.name}.bias"] = (spec.cout,)
    missing = sorted(set(expected) - set(params))
    unexpected = sorted(set(params) - set(expected))
    if missing or unexpected:
        raise FormatError(f"{path} does not match its network config: missing {missing}, unexpected {unexpected}")
    wrong = [f"{k} {params[k].shape} != {shape}" for k, shape in expected.items() if params[k].shape != shape]
    if wrong:
        raise FormatError(f"{path} has mis-shaped parameters: {', '.join(wrong)}")


def load_checkpoint(path: Union[str, Path]) -> TrainState:
    store = TensorStore.load(path)
    meta = store.metadata
    if meta.get("format") != FORMAT_TAG:
        raise FormatError(f"{path} is not a checkpoint (format={meta.get('format')!r})")
    if int(meta.get("version", 0)) > CHECKPOINT_VERSION:
        logger.warning("checkpoint %s has newer version %s; reading known fields only", path, meta["version"])
    if not isinstance(meta.get("network"), dict):
        raise FormatError(f"{path} has no network configuration in its metadata")
    config = NetworkConfig.from_dict(meta["network"])
    params = store.group("param/")
    if not params:
        raise FormatError(f"{path} holds no parameters")
    _check_layout(path, config, params)
    state = TrainState(
        config=config,
        params=params,
        m=store.group("adam_m/"),
        v=store.group("adam_v/"),
        step=int(meta.get("step", 0)),
        seed=int(meta.get("seed", 0)),
    )
    logger.debug("loaded checkpoint step=%d (%d tensors) from %s", state.step, len(params), path)
    return state


def read_metadata(path: Union[str, Path]) -> Dict[str, Any]:
    return TensorStore.load(path).metadata
