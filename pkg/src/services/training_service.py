"""Training loop: sample, forward, l1 loss, backward, Adam with cosine lr.

Every optimizer step appends `step=<n> lr=<f> loss=<f>` to `metrics.log`
in the run directory (plus `val_psnr`/`val_ssim` on validation steps) and
mirrors the line at INFO. `latest.nbt` is rewritten every
`checkpoint_every` steps and `final.nbt` at the end; when a step produces
non-finite values the run stops and `latest.nbt` stays the last good state.
"""
import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd

from src.autograd import GradTape, Tensor, l1_loss
from src.config import settings
from src.config.schema import NetworkConfig, NoiseSpec, TrainConfig
from src.db.checkpoint import save_checkpoint
from src.models.nbnet import TrainState, build, run_network
from src.services.evaluation_service import EvaluationService
from src.services.optim import adam_step, clip_by_global_norm, cosine_lr
from src.services.sampling import BatchLoader, ImageDataset
from src.utils.errors import ConfigurationError, NumericalError

logger = logging.getLogger(__name__)

_FIELD = re.compile(r"(\w+)=(\S+)")


def loss_and_grads(state: TrainState, clean: np.ndarray, noisy: np.ndarray) -> Tuple[float, Dict[str, np.ndarray]]:
    params = state.tensors(requires_grad=True)
    with GradTape() as tape:
        restored = run_network(state.config, params, Tensor(noisy.astype(state.dtype, copy=False)))
        loss = l1_loss(restored, Tensor(clean.astype(state.dtype, copy=False)))
    grads = tape.gradient(loss, list(params.values()))
    return loss.item(), dict(zip(params, grads))


def format_log_line(step: int, lr: float, loss: float, val: Optional[Tuple[float, float]] = None) -> str:
    line = f"step={step} lr={lr:.6e} loss={loss:.6f}"
    if val is not None:
        line += f" val_psnr={val[0]:.4f} val_ssim={val[1]:.4f}"
    return line


def load_metrics_log(path: Union[str, Path]) -> pd.DataFrame:
    """Parse a metrics log into one row per line (missing fields are NaN)."""
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            fields = dict(_FIELD.findall(line))
            if fields:
                rows.append({k: float(v) for k, v in fields.items()})
    frame = pd.DataFrame(rows)
    if "step" in frame:
        frame["step"] = frame["step"].astype(int)
    return frame


@dataclass
class TrainResult:
    state: TrainState
    checkpoint: Path
    log_path: Path
    history: pd.DataFrame

    @property
    def initial_loss(self) -> float:
        return float(self.history["loss"].iloc[0]) if len(self.history) else math.nan

    @property
    def final_loss(self) -> float:
        return float(self.history["loss"].iloc[-1]) if len(self.history) else math.nan


class TrainingService:
    """Runs one training job into `out_dir`."""

    def __init__(
        self,
        net_config: NetworkConfig,
        train_config: TrainConfig,
        out_dir: Union[str, Path] = settings.CHECKPOINT_DIR,
        noise: Optional[NoiseSpec] = None,
        num_workers: int = settings.NUM_WORKERS,
        dtype=np.float32,
    ):
        train_config.validate_for(net_config)
        self.net_config = net_config
        self.train_config = train_config
        self.out_dir = Path(out_dir)
        self.noise = noise
        self.num_workers = num_workers
        self.dtype = dtype

    def _record(self) -> Dict[str, object]:
        return {
            "train": self.train_config.to_dict(),
            "noise": self.noise.to_dict() if self.noise is not None else None,
        }

    def _validate(self, state: TrainState, val_data: ImageDataset) -> Tuple[float, float]:
        noise = self.noise.with_seed(self.noise.seed + 1) if self.noise is not None else None
        report = EvaluationService(noise=noise).evaluate(state, val_data)
        return report.mean_psnr, report.mean_ssim

    def train(
        self,
        data: ImageDataset,
        val_data: Optional[ImageDataset] = None,
        state: Optional[TrainState] = None,
    ) -> TrainResult:
        cfg = self.train_config
        if not data.paired and self.noise is None:
            raise ConfigurationError("synthetic-noise training needs a noise spec")
        if state is None:
            state = build(self.net_config, seed=cfg.seed, dtype=self.dtype)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        log_path = self.out_dir / "metrics.log"
        latest = self.out_dir / "latest.nbt"
        save_checkpoint(state, latest, extra=self._record())

        noise = self.noise.with_seed(cfg.seed) if self.noise is not None and not data.paired else None
        loader = BatchLoader(
            data, cfg.patch, cfg.batch, (cfg.augment_rotate, cfg.augment_flip), cfg.seed,
            noise=noise, freeze_noise=cfg.freeze_noise, num_workers=self.num_workers,
        )
        logger.info(
            "training %d -> %d iters, batch %d, patch %d, %s",
            state.step, cfg.total_iters, cfg.batch, cfg.patch,
            "paired data" if data.paired else noise.describe(),
        )

        mode = "a" if state.step > 0 else "w"
        with open(log_path, mode, encoding="utf-8") as log:
            for batch in loader.iterate(state.step, cfg.total_iters):
                step = state.step
                lr = cosine_lr(step, cfg.total_iters, cfg.lr0, cfg.eta_min)
                try:
                    loss, grads = loss_and_grads(state, batch.clean, batch.noisy)
                    if not math.isfinite(loss):
                        raise NumericalError(f"non-finite loss {loss} at step {step}")
                    if cfg.clip_norm is not None:
                        grads, _ = clip_by_global_norm(grads, cfg.clip_norm)
                    adam_step(state, grads, lr, cfg.betas, cfg.eps_adam)
                except NumericalError:
                    logger.error("training aborted at step %d; last good checkpoint is %s", step, latest)
                    raise

                val = None
                if val_data is not None and len(val_data) and cfg.eval_every and state.step % cfg.eval_every == 0:
                    val = self._validate(state, val_data)
                line = format_log_line(state.step, lr, loss, val)
                log.write(line + "\n")
                log.flush()
                logger.info(line)

                if cfg.checkpoint_every and state.step % cfg.checkpoint_every == 0:
                    save_checkpoint(state, latest, extra=self._record())

        final = save_checkpoint(state, self.out_dir / "final.nbt", extra=self._record())
        history = load_metrics_log(log_path) if log_path.stat().st_size else pd.DataFrame(columns=["step", "lr", "loss"])
        return TrainResult(state=state, checkpoint=final, log_path=log_path, history=history)


def train(
    net_config: NetworkConfig,
    train_config: TrainConfig,
    dataset: ImageDataset,
    noise: Optional[NoiseSpec] = None,
    out_dir: Union[str, Path] = settings.CHECKPOINT_DIR,
    val_data: Optional[ImageDataset] = None,
    num_workers: int = settings.NUM_WORKERS,
) -> TrainResult:
    """Train from scratch; pass `noise=None` with a paired dataset."""
    service = TrainingService(net_config, train_config, out_dir=out_dir, noise=noise, num_workers=num_workers)
    return service.train(dataset, val_data=val_data)
