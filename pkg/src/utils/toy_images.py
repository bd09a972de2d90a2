"""Synthetic clean images: smooth random fields with a few sharp-edged shapes."""
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
from scipy import ndimage

from src.utils.image_io import quantize, write_image
from src.utils.manifest import DatasetManifest, from_paths


def smooth_image(rng: np.random.Generator, size: int, channels: int = 3, shapes: int = 3) -> np.ndarray:
    """C x size x size image in [0, 1], already on the 8-bit grid."""
    field = rng.standard_normal((channels, size, size))
    field = ndimage.gaussian_filter(field, sigma=(0, size / 8, size / 8), mode="wrap")
    field = (field - field.min()) / max(float(field.max() - field.min()), 1e-12)
    img = 0.2 + 0.6 * field

    yy, xx = np.mgrid[0:size, 0:size]
    for _ in range(shapes):
        color = rng.uniform(0.05, 0.95, size=(channels, 1, 1))
        if rng.random() < 0.5:
            top, left = rng.integers(0, size // 2, size=2)
            h, w = rng.integers(size // 8, size // 2, size=2)
            region = (yy >= top) & (yy < top + h) & (xx >= left) & (xx < left + w)
        else:
            cy, cx = rng.uniform(0, size, size=2)
            r = rng.uniform(size / 10, size / 4)
            region = (yy - cy) ** 2 + (xx - cx) ** 2 < r * r
        img = np.where(region[None], 0.5 * img + 0.5 * color, img)
    return quantize(img).astype(np.float64) / 255.0


def write_toy_corpus(
    out_dir: Union[str, Path], count: int, size: int = 64, seed: int = 0, channels: int = 3, prefix: str = "toy"
) -> Tuple[DatasetManifest, List[Path]]:
    """Write `count` images and `<prefix>.tsv`, returning the manifest."""
    out_dir = Path(out_dir)
    rng = np.random.default_rng(seed)
    ext = ".ppm" if channels == 3 else ".pgm"
    paths = [
        write_image(smooth_image(rng, size, channels), out_dir / f"{prefix}_{i:04d}{ext}") for i in range(count)
    ]
    manifest = from_paths(paths, out_dir, color="rgb" if channels == 3 else "gray")
    manifest.save(out_dir / f"{prefix}.tsv")
    return manifest, paths
