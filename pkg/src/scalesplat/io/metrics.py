from __future__ import annotations

import math

import numpy as np
from scipy.ndimage import correlate1d

from ..core import ImageBuffer
from ..errors import DimensionMismatchError, TooSmallError

PSNR_CAP = 99.0
LUMA = np.array([0.299, 0.587, 0.114])


def _check_same(a: ImageBuffer, b: ImageBuffer):
    if a.pixels.shape != b.pixels.shape:
        raise DimensionMismatchError(f"{a.width}x{a.height} vs {b.width}x{b.height}")


def psnr(a: ImageBuffer, b: ImageBuffer) -> float:
    """PSNR in dB for images in [0, 1]; ``inf`` when identical."""
    _check_same(a, b)
    mse = float(np.mean((a.pixels - b.pixels) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def capped(db: float) -> float:
    return min(db, PSNR_CAP)


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-0.5 * (x / sigma) ** 2)
    return g / g.sum()


def _filter_valid(x, win):
    r = len(win) // 2
    y = correlate1d(x, win, axis=0, mode="constant")
    y = correlate1d(y, win, axis=1, mode="constant")
    return y[r:-r, r:-r]


def ssim(a: ImageBuffer, b: ImageBuffer, k1: float = 0.01, k2: float = 0.03,
         window: int = 11, sigma: float = 1.5) -> float:
    """Single-scale SSIM on Rec. 601 luma with a Gaussian window (valid region only)."""
    _check_same(a, b)
    if min(a.width, a.height) < window:
        raise TooSmallError(f"SSIM needs both sides >= {window}")
    x = a.pixels @ LUMA
    y = b.pixels @ LUMA
    c1, c2 = k1 ** 2, k2 ** 2
    win = _gaussian_window(window, sigma)
    mx, my = _filter_valid(x, win), _filter_valid(y, win)
    sxx = _filter_valid(x * x, win) - mx * mx
    syy = _filter_valid(y * y, win) - my * my
    sxy = _filter_valid(x * y, win) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))
