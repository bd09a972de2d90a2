"""Adam with cosine-annealed learning rate, plus global-norm gradient clipping."""
import logging
import math
from typing import Dict, Mapping, Tuple

import numpy as np

from src.models.nbnet import TrainState
from src.utils.errors import ConfigurationError, NumericalError

logger = logging.getLogger(__name__)


def cosine_lr(step: int, total: int, lr0: float, eta_min: float = 0.0) -> float:
    """eta_min + (lr0 - eta_min) * (1 + cos(pi * step / total)) / 2."""
    if total <= 0:
        return lr0
    if not 0 <= step <= total:
        raise ConfigurationError(f"step {step} outside [0, {total}]")
    return eta_min + (lr0 - eta_min) * (1.0 + math.cos(math.pi * step / total)) / 2.0


def check_gradients(grads: Mapping[str, np.ndarray]) -> None:
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericalError("non-finite gradient", parameter=name)


def clip_by_global_norm(grads: Dict[str, np.ndarray], max_norm: float) -> Tuple[Dict[str, np.ndarray], float]:
    norm = math.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads.values()))
    if norm <= max_norm or norm == 0.0:
        return grads, norm
    scale = max_norm / norm
    return {k: (g * scale).astype(g.dtype, copy=False) for k, g in grads.items()}, norm


def adam_step(
    state: TrainState,
    grads: Mapping[str, np.ndarray],
    lr: float,
    betas: Tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> TrainState:
    """Bias-corrected Adam update of `state` in place; returns it."""
    if set(grads) != set(state.params):
        missing = sorted(set(state.params) - set(grads))
        extra = sorted(set(grads) - set(state.params))
        raise ConfigurationError(f"gradients do not match parameters (missing {missing[:3]}, extra {extra[:3]})")
    check_gradients(grads)

    b1, b2 = betas
    t = state.step + 1
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, p in state.params.items():
        g = np.asarray(grads[name], dtype=p.dtype)
        m = b1 * state.m[name] + (1 - b1) * g
        v = b2 * state.v[name] + (1 - b2) * g * g
        update = lr * (m / c1) / (np.sqrt(v / c2) + eps)
        state.m[name] = m.astype(p.dtype, copy=False)
        state.v[name] = v.astype(p.dtype, copy=False)
        state.params[name] = (p - update).astype(p.dtype, copy=False)
    state.step = t
    return state
