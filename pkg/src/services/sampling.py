"""In-memory image datasets, random patch batches and ordered prefetching.

Each training batch is drawn from its own generator seeded by
(seed, batch index), so batches can be assembled on worker threads in any
order and still be consumed deterministically.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from src.config.schema import NoiseSpec
from src.services.noise_service import apply_noise
from src.utils.errors import ConfigurationError, DatasetError
from src.utils.image_io import read_image
from src.utils.manifest import DatasetManifest

logger = logging.getLogger(__name__)

# Dihedral group elements: k % 4 quarter turns, then a horizontal flip if k >= 4.
DIHEDRAL = tuple(range(8))


@dataclass
class ImageDataset:
    """Clean images (C x H x W) and, for paired data, their noisy versions."""

    clean: List[np.ndarray]
    noisy: Optional[List[np.ndarray]] = None
    names: List[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.names:
            self.names = [f"image{i:03d}" for i in range(len(self.clean))]
        if self.noisy is not None and len(self.noisy) != len(self.clean):
            raise ConfigurationError("paired dataset needs one noisy image per clean image")
        shapes = {img.shape[0] for img in self.clean}
        if len(shapes) > 1:
            raise ConfigurationError(f"mixed channel counts in dataset: {sorted(shapes)}")

    def __len__(self) -> int:
        return len(self.clean)

    @property
    def paired(self) -> bool:
        return self.noisy is not None

    @classmethod
    def from_manifest(cls, manifest: DatasetManifest, paired: bool = False, dtype=np.float32) -> "ImageDataset":
        manifest.check_files()
        if paired:
            manifest.require_paired()
        clean = [read_image(r.clean_path, dtype=dtype).data[0] for r in manifest]
        noisy = [read_image(r.noisy_path, dtype=dtype).data[0] for r in manifest] if paired else None
        for img, record in zip(clean, manifest):
            if img.shape[0] != manifest.channels:
                raise ConfigurationError(
                    f"{record.clean_path} has {img.shape[0]} channels, manifest declares {manifest.color}"
                )
        return cls(clean=clean, noisy=noisy, names=[str(r.clean_path) for r in manifest])

    def subset(self, indices) -> "ImageDataset":
        indices = list(indices)
        return ImageDataset(
            clean=[self.clean[i] for i in indices],
            noisy=[self.noisy[i] for i in indices] if self.noisy is not None else None,
            names=[self.names[i] for i in indices],
        )


def dihedral(patch: np.ndarray, k: int) -> np.ndarray:
    """Apply dihedral element k (0..7) to the trailing two axes."""
    out = np.rot90(patch, k % 4, axes=(-2, -1))
    if k >= 4:
        out = out[..., ::-1]
    return np.ascontiguousarray(out)


def _augment_choices(rotate: bool, flip: bool) -> Tuple[int, ...]:
    if rotate and flip:
        return DIHEDRAL
    if rotate:
        return (0, 1, 2, 3)
    if flip:
        return (0, 4)
    return (0,)


@dataclass
class Batch:
    clean: np.ndarray
    noisy: np.ndarray
    sources: List[int]
    offsets: List[Tuple[int, int]]
    transforms: List[int]


def eligible_images(dataset: ImageDataset, patch: int) -> List[int]:
    keep = []
    for i, img in enumerate(dataset.clean):
        if img.shape[1] >= patch and img.shape[2] >= patch:
            keep.append(i)
        else:
            logger.warning("skipping %s: %dx%d is smaller than patch %d", dataset.names[i], img.shape[1], img.shape[2], patch)
    if not keep:
        raise DatasetError([f"no image of at least {patch}x{patch} in dataset"])
    return keep


def sample_batch(
    dataset: ImageDataset,
    patch: int,
    batch: int,
    augment: Tuple[bool, bool],
    rng: np.random.Generator,
    noise: Optional[NoiseSpec] = None,
    noise_stream: int = 0,
    candidates: Optional[List[int]] = None,
) -> Batch:
    """Random crops with dihedral augmentation; synthetic noise is applied last.

    `augment` is (rotate, flip). Paired datasets get the same crop and
    transform on both images; otherwise `noise` is required.
    """
    if not dataset.paired and noise is None:
        raise ConfigurationError("unpaired dataset needs a noise spec")
    candidates = candidates if candidates is not None else eligible_images(dataset, patch)
    choices = _augment_choices(*augment)

    clean, noisy, sources, offsets, transforms = [], [], [], [], []
    for _ in range(batch):
        idx = candidates[int(rng.integers(len(candidates)))]
        img = dataset.clean[idx]
        top = int(rng.integers(img.shape[1] - patch + 1))
        left = int(rng.integers(img.shape[2] - patch + 1))
        k = choices[int(rng.integers(len(choices)))]
        window = np.s_[:, top:top + patch, left:left + patch]
        clean.append(dihedral(img[window], k))
        if dataset.paired:
            noisy.append(dihedral(dataset.noisy[idx][window], k))
        sources.append(idx)
        offsets.append((top, left))
        transforms.append(k)

    clean_arr = np.stack(clean)
    if dataset.paired:
        noisy_arr = np.stack(noisy)
    else:
        noisy_arr = apply_noise(clean_arr, noise, stream=noise_stream)
    return Batch(clean_arr, noisy_arr, sources, offsets, transforms)


class BatchLoader:
    """Deterministic batch stream with optional worker-thread prefetching.

    Batch `i` uses `default_rng([seed, i])` and noise stream `i + 1`
    (stream 0 for every batch when the noise is frozen).
    """

    def __init__(
        self,
        dataset: ImageDataset,
        patch: int,
        batch: int,
        augment: Tuple[bool, bool],
        seed: int,
        noise: Optional[NoiseSpec] = None,
        freeze_noise: bool = False,
        num_workers: int = 0,
        prefetch: int = 4,
    ):
        self.dataset = dataset
        self.patch = patch
        self.batch = batch
        self.augment = augment
        self.seed = seed
        self.noise = noise
        self.freeze_noise = freeze_noise
        self.num_workers = num_workers
        self.prefetch = max(prefetch, num_workers)
        self._candidates = eligible_images(dataset, patch)

    def make(self, index: int) -> Batch:
        rng = np.random.default_rng([self.seed, index])
        stream = 0 if self.freeze_noise else index + 1
        return sample_batch(
            self.dataset, self.patch, self.batch, self.augment, rng,
            noise=self.noise, noise_stream=stream, candidates=self._candidates,
        )

    def iterate(self, start: int, stop: int) -> Iterator[Batch]:
        if self.num_workers <= 0:
            for i in range(start, stop):
                yield self.make(i)
            return
        with ThreadPoolExecutor(max_workers=self.num_workers, thread_name_prefix="batch") as pool:
            pending: Dict[int, object] = {}
            ahead = start
            for i in range(start, stop):
                while ahead < stop and ahead < i + self.prefetch:
                    pending[ahead] = pool.submit(self.make, ahead)
                    ahead += 1
                yield pending.pop(i).result()
