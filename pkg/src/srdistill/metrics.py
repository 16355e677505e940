"""PSNR and SSIM with peak 1.0.

PSNR uses the MSE over every channel; SSIM uses the luma channel with an
11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, averaged over the
valid window positions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imageio import load_image, to_luma

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
REPORT_HEADER = {
    "format": "srdistill-metrics",
    "version": 1,
    "peak": 1.0,
    "psnr": "mse over all channels",
    "ssim": f"luma, {SSIM_WINDOW}x{SSIM_WINDOW} gaussian sigma={SSIM_SIGMA}, K1={SSIM_K1}, K2={SSIM_K2}, valid windows",
}


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB; ``math.inf`` for identical inputs."""
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    n = g.size
    x = np.lib.stride_tricks.sliding_window_view(x, n, axis=0) @ g
    return np.lib.stride_tricks.sliding_window_view(x, n, axis=1) @ g


def ssim_map(a, b) -> np.ndarray:
    a, b = _pair(a, b)
    if a.ndim == 3:
        a = to_luma(a.astype(np.float32))[:, :, 0].astype(np.float64)
        b = to_luma(b.astype(np.float32))[:, :, 0].astype(np.float64)
    if min(a.shape[:2]) < SSIM_WINDOW:
        raise ValueError(f"image {a.shape[:2]} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    g = gaussian_window()
    c1 = SSIM_K1**2
    c2 = SSIM_K2**2
    mu_a = _filter_valid(a, g)
    mu_b = _filter_valid(b, g)
    var_a = _filter_valid(a * a, g) - mu_a * mu_a
    var_b = _filter_valid(b * b, g) - mu_b * mu_b
    cov = _filter_valid(a * b, g) - mu_a * mu_b
    num = (2.0 * (mu_a * mu_b) + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return num / den


def ssim(a, b) -> float:
    return float(ssim_map(a, b).mean())


@dataclass(frozen=True)
class MetricReport:
    id: str
    psnr_db: float
    ssim: float

    def to_json(self) -> str:
        psnr_val = "inf" if math.isinf(self.psnr_db) else self.psnr_db
        return json.dumps({"id": self.id, "psnr_db": psnr_val, "ssim": self.ssim})


def compare_dirs(ref_dir, test_dir) -> list[MetricReport]:
    """Score every ``*.png`` of ``test_dir`` against the same-named file in ``ref_dir``."""
    ref = sorted(p.name for p in Path(ref_dir).glob("*.png"))
    test = sorted(p.name for p in Path(test_dir).glob("*.png"))
    if len(ref) != len(test):
        raise ValueError(f"image counts differ: {len(ref)} reference vs {len(test)} test")
    if ref != test:
        missing = sorted(set(ref).symmetric_difference(test))
        raise ValueError(f"file names differ between directories: {missing[:5]}")
    out = []
    for name in ref:
        a = load_image(Path(ref_dir) / name)
        b = load_image(Path(test_dir) / name)
        out.append(MetricReport(Path(name).stem, psnr(a, b), ssim(a, b)))
    return out
