"""Evaluation of a trained denoiser on clean/noisy image sets.

For every image the noisy input is either read from the paired record or
synthesised with noise stream = image index, so a report depends only on
(checkpoint, dataset, noise spec). Images whose size is not divisible by
2**stages are center-cropped to the nearest smaller multiple. Outputs and
noisy baselines are clamped to [0, 1] before scoring.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from src.config import settings
from src.config.schema import NoiseSpec
from src.db.checkpoint import load_checkpoint
from src.evaluation.metrics import MetricReport, psnr, ssim
from src.models.nbnet import TrainState, forward
from src.services.noise_service import apply_noise
from src.services.sampling import ImageDataset
from src.utils.errors import ConfigurationError
from src.utils.manifest import DatasetManifest

logger = logging.getLogger(__name__)


def center_crop(image: np.ndarray, factor: int) -> np.ndarray:
    """Crop a C x H x W image to the largest multiple of `factor` per side."""
    _, h, w = image.shape
    nh, nw = h - h % factor, w - w % factor
    if nh == 0 or nw == 0:
        raise ConfigurationError(f"image {h}x{w} is smaller than the network factor {factor}")
    top, left = (h - nh) // 2, (w - nw) // 2
    return image[:, top:top + nh, left:left + nw]


class EvaluationService:
    """Scores a network state on a dataset with PSNR and SSIM."""

    def __init__(self, noise: Optional[NoiseSpec] = None, num_workers: int = settings.NUM_WORKERS):
        self.noise = noise
        self.num_workers = num_workers

    def _pair(self, state: TrainState, dataset: ImageDataset, index: int) -> Tuple[np.ndarray, np.ndarray]:
        factor = 2 ** state.config.stages
        clean = center_crop(dataset.clean[index], factor).astype(state.dtype)[None]
        if dataset.paired:
            noisy = center_crop(dataset.noisy[index], factor).astype(state.dtype)[None]
        else:
            noisy = apply_noise(clean, self.noise, stream=index)
        return clean, noisy

    def score_image(self, state: TrainState, dataset: ImageDataset, index: int) -> Dict[str, object]:
        clean, noisy = self._pair(state, dataset, index)
        restored = np.clip(forward(state, noisy).data, 0.0, 1.0)
        baseline = np.clip(noisy, 0.0, 1.0)
        return {
            "image": dataset.names[index],
            "psnr_db": psnr(clean, restored),
            "ssim": ssim(clean, restored),
            "noisy_psnr_db": psnr(clean, baseline),
            "noisy_ssim": ssim(clean, baseline),
        }

    def evaluate(self, state: TrainState, dataset: ImageDataset) -> MetricReport:
        if not dataset.paired and self.noise is None:
            raise ConfigurationError("evaluation on clean-only data needs a noise spec")
        indices = range(len(dataset))
        if self.num_workers > 0:
            with ThreadPoolExecutor(max_workers=self.num_workers) as pool:
                rows = list(pool.map(lambda i: self.score_image(state, dataset, i), indices))
        else:
            rows = [self.score_image(state, dataset, i) for i in indices]

        report = MetricReport()
        for row in rows:
            report.add(row.pop("image"), row.pop("psnr_db"), row.pop("ssim"), **row)
        logger.info(
            "evaluated %d images (%s): PSNR %.3f dB, SSIM %.4f",
            len(report), self.noise.describe() if self.noise and not dataset.paired else "paired",
            report.mean_psnr, report.mean_ssim,
        )
        return report


def evaluate(
    checkpoint: Union[str, Path, TrainState],
    dataset: Union[DatasetManifest, ImageDataset],
    noise: Optional[NoiseSpec] = None,
    paired: bool = False,
    num_workers: int = settings.NUM_WORKERS,
) -> MetricReport:
    state = checkpoint if isinstance(checkpoint, TrainState) else load_checkpoint(checkpoint)
    if isinstance(dataset, DatasetManifest):
        dataset = ImageDataset.from_manifest(dataset, paired=paired, dtype=state.dtype)
    if paired and not dataset.paired:
        raise ConfigurationError("paired evaluation needs a paired dataset")
    if not paired and dataset.paired:
        dataset = ImageDataset(clean=dataset.clean, names=dataset.names)
    return EvaluationService(noise=None if paired else noise, num_workers=num_workers).evaluate(state, dataset)
