"""End-to-end desk experiments: synthesise a toy corpus, train, score."""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from src.evaluation.metrics import MetricReport, psnr, ssim
from src.models.nbnet import forward
from src.models.presets import experiment_presets
from src.services.evaluation_service import EvaluationService
from src.services.noise_service import apply_noise
from src.services.sampling import ImageDataset
from src.services.training_service import TrainResult, TrainingService
from src.utils.errors import ConfigurationError
from src.utils.toy_images import write_toy_corpus

logger = logging.getLogger(__name__)


@dataclass
class ExperimentResult:
    name: str
    train: TrainResult
    report: MetricReport

    @property
    def gain_db(self) -> float:
        noisy = float(np.mean([r["noisy_psnr_db"] for r in self.report.rows]))
        return self.report.mean_psnr - noisy


def _score_training_patch(result: TrainResult, data: ImageDataset, name: str) -> MetricReport:
    """Score the frozen noisy realisation the network was fitted to."""
    exp = experiment_presets()[name]
    noise = exp.noise.with_seed(exp.train.seed)
    clean = data.clean[0][None].astype(result.state.dtype)
    noisy = apply_noise(clean, noise, stream=0)
    restored = np.clip(forward(result.state, noisy).data, 0.0, 1.0)
    baseline = np.clip(noisy, 0.0, 1.0)
    report = MetricReport()
    report.add(data.names[0], psnr(clean, restored), ssim(clean, restored),
               noisy_psnr_db=psnr(clean, baseline), noisy_ssim=ssim(clean, baseline))
    return report


def run_experiment(name: str, work_dir: Union[str, Path], iters: Optional[int] = None, seed: int = 0) -> ExperimentResult:
    presets = experiment_presets()
    if name not in presets:
        raise ConfigurationError(f"unknown experiment {name!r}; choose from {sorted(presets)}")
    exp = presets[name]
    train_cfg = exp.train
    if iters is not None:
        train_cfg = type(train_cfg).from_dict({**train_cfg.to_dict(), "total_iters": iters})
    work_dir = Path(work_dir)

    train_manifest, _ = write_toy_corpus(work_dir / "data", exp.train_images, exp.image_size, seed, prefix="train")
    data = ImageDataset.from_manifest(train_manifest)
    val = None
    if exp.val_images:
        val_manifest, _ = write_toy_corpus(work_dir / "data", exp.val_images, exp.image_size, seed + 1000, prefix="val")
        val = ImageDataset.from_manifest(val_manifest)

    service = TrainingService(exp.net, train_cfg, out_dir=work_dir / "run", noise=exp.noise)
    result = service.train(data, val_data=val)

    if exp.train.freeze_noise:
        report = _score_training_patch(result, data, name)
    else:
        report = EvaluationService(noise=exp.noise.with_seed(seed + 1)).evaluate(result.state, val)
    outcome = ExperimentResult(name=name, train=result, report=report)
    logger.info("%s: loss %.5f -> %.5f, PSNR gain %.2f dB", name, result.initial_loss, result.final_loss, outcome.gain_db)
    return outcome
