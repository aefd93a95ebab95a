"""Image similarity metrics on the native [0, 1] pixel scale."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .core import InvalidInputError

PSNR_CAP = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


@dataclass(frozen=True)
class MetricReport:
    l2: float
    linf: float
    psnr: float
    ssim: float


def _pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise InvalidInputError(f"shape mismatch: {x.shape} vs {y.shape}")
    return x, y


def l2(x, y) -> float:
    x, y = _pair(x, y)
    return float(np.linalg.norm((x - y).ravel()))


def linf(x, y) -> float:
    x, y = _pair(x, y)
    return float(np.max(np.abs(x - y))) if x.size else 0.0


def psnr(x, y, peak: float = 1.0) -> float:
    x, y = _pair(x, y)
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(peak * peak / mse))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalised 1-D Gaussian taps."""
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-0.5 * (r / sigma) ** 2)
    return g / g.sum()


def ssim(x, y, data_range: float = 1.0) -> float:
    """Mean SSIM over all valid 11x11 windows, averaged across channels."""
    x, y = _pair(x, y)
    if x.ndim == 2:
        x, y = x[..., None], y[..., None]
    if x.ndim != 3:
        raise InvalidInputError(f"ssim expects (H, W, C) images, got {x.shape}")
    if min(x.shape[:2]) < SSIM_WINDOW:
        raise InvalidInputError(f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW}")
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    g = gaussian_window()
    half = SSIM_WINDOW // 2

    def blur(a):
        out = correlate1d(correlate1d(a, g, axis=0, mode="constant"), g, axis=1, mode="constant")
        return out[half:-half, half:-half]  # keep windows fully inside the image

    mx, my = blur(x), blur(y)
    sxx = blur(x * x) - mx * mx
    syy = blur(y * y) - my * my
    sxy = blur(x * y) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def report(x, y) -> MetricReport:
    return MetricReport(l2(x, y), linf(x, y), psnr(x, y), ssim(x, y))
