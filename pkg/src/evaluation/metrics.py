"""PSNR and SSIM image quality metrics.

SSIM uses an 11x11 Gaussian window (sigma 1.5) over BT.601 luma, filtered in
`valid` mode so no border padding enters the statistics. An 8x8 uniform
window is available as `window="box8"`.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np
import pandas as pd
from scipy import signal

from src.autograd import Tensor
from src.utils.errors import ConfigurationError

logger = logging.getLogger(__name__)

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])
K1, K2 = 0.01, 0.03


def _array(image) -> np.ndarray:
    arr = image.data if isinstance(image, Tensor) else np.asarray(image)
    return arr.astype(np.float64)


def psnr(ref, test, peak: float = 1.0) -> float:
    """10 log10(peak^2 / MSE) in dB; `inf` for identical images."""
    a, b = _array(ref), _array(test)
    if a.shape != b.shape:
        raise ConfigurationError(f"psnr: shapes differ {a.shape} vs {b.shape}")
    if peak <= 0:
        raise ConfigurationError(f"psnr: peak must be > 0, got {peak}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def to_luma(image) -> np.ndarray:
    """H x W float64 plane from an (H, W), (C, H, W) or (1, C, H, W) image."""
    arr = _array(image)
    if arr.ndim == 4:
        if arr.shape[0] != 1:
            raise ConfigurationError(f"expected a single image, got batch of {arr.shape[0]}")
        arr = arr[0]
    if arr.ndim == 2:
        return arr
    if arr.ndim == 3 and arr.shape[0] == 1:
        return arr[0]
    if arr.ndim == 3 and arr.shape[0] == 3:
        return np.tensordot(LUMA_WEIGHTS, arr, axes=([0], [0]))
    raise ConfigurationError(f"cannot take luma of shape {arr.shape}")


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2
    g = np.exp(-(r ** 2) / (2 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def _window(kind: str) -> np.ndarray:
    if kind == "gaussian":
        return gaussian_window()
    if kind == "box8":
        return np.full((8, 8), 1.0 / 64)
    raise ConfigurationError(f"unknown SSIM window {kind!r}")


def ssim_map(ref, test, peak: float = 1.0, window: str = "gaussian") -> np.ndarray:
    x, y = to_luma(ref), to_luma(test)
    if x.shape != y.shape:
        raise ConfigurationError(f"ssim: shapes differ {x.shape} vs {y.shape}")
    w = _window(window)
    if x.shape[0] < w.shape[0] or x.shape[1] < w.shape[1]:
        raise ConfigurationError(f"ssim: image {x.shape} smaller than the {w.shape} window")
    c1, c2 = (K1 * peak) ** 2, (K2 * peak) ** 2

    def filt(a: np.ndarray) -> np.ndarray:
        return signal.correlate2d(a, w, mode="valid")

    mu_x, mu_y = filt(x), filt(y)
    var_x = filt(x * x) - mu_x * mu_x
    var_y = filt(y * y) - mu_y * mu_y
    cov = filt(x * y) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return num / den


def ssim(ref, test, peak: float = 1.0, window: str = "gaussian") -> float:
    return float(np.mean(ssim_map(ref, test, peak=peak, window=window)))


@dataclass
class MetricReport:
    """Per-image PSNR/SSIM rows plus their arithmetic means."""

    rows: List[Dict[str, object]] = field(default_factory=list)

    def add(self, name: str, psnr_db: float, ssim_value: float, **extra) -> None:
        self.rows.append({"image": name, "psnr_db": psnr_db, "ssim": ssim_value, **extra})

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def psnr_db(self) -> List[float]:
        return [float(r["psnr_db"]) for r in self.rows]

    @property
    def ssim(self) -> List[float]:
        return [float(r["ssim"]) for r in self.rows]

    @property
    def mean_psnr(self) -> float:
        return float(np.mean(self.psnr_db)) if self.rows else math.nan

    @property
    def mean_ssim(self) -> float:
        return float(np.mean(self.ssim)) if self.rows else math.nan

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=list(self.rows[0]) if self.rows else ["image", "psnr_db", "ssim"])

    def format(self, precision: int = 4) -> str:
        frame = self.to_frame()
        mean = {"image": "mean", "psnr_db": self.mean_psnr, "ssim": self.mean_ssim}
        frame = pd.concat([frame, pd.DataFrame([mean])], ignore_index=True)
        return frame.to_string(index=False, float_format=lambda v: f"{v:.{precision}f}")

    def write_records(self, path) -> None:
        """One tab-separated UTF-8 line per image: path, psnr_db, ssim."""
        frame = self.to_frame()[["image", "psnr_db", "ssim"]]
        frame.to_csv(path, sep="\t", index=False, encoding="utf-8", float_format="%.6f")
