"""Image quality metrics computable without pretrained networks: PSNR, SSIM."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.signal import convolve2d

from .errors import ImageTooSmallError, ShapeMismatchError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


@dataclass(frozen=True)
class MetricReport:
    """PSNR (dB, +inf for identical images) and SSIM in [-1, 1]."""

    psnr: float
    ssim: float


def _check_pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a: NDArray[np.float64], b: NDArray[np.float64]) -> float:
    """Peak signal-to-noise ratio over all channels at data range 1.

    Identical images return math.inf rather than raising.
    """
    a, b = _check_pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> NDArray[np.float64]:
    offsets = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    window = np.outer(g, g)
    return window / window.sum()


def _ssim_channel(x: NDArray[np.float64], y: NDArray[np.float64], window: NDArray[np.float64]) -> float:
    # classic formulation: Gaussian-filtered moments, 'valid' region only
    mu_x = convolve2d(x, window, mode="valid")
    mu_y = convolve2d(y, window, mode="valid")
    xx = convolve2d(x * x, window, mode="valid")
    yy = convolve2d(y * y, window, mode="valid")
    xy = convolve2d(x * y, window, mode="valid")
    var_x = xx - mu_x * mu_x
    var_y = yy - mu_y * mu_y
    cov = xy - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (var_x + var_y + SSIM_C2)
    return float(np.mean(num / den))


def ssim(a: NDArray[np.float64], b: NDArray[np.float64]) -> float:
    """Mean structural similarity, per channel, averaged over channels.

    Uses the standard 11x11 Gaussian window with sigma 1.5 and stabilizers
    (0.01)^2, (0.03)^2 at data range 1.

    Raises:
        ImageTooSmallError: if either side is smaller than the window.
    """
    a, b = _check_pair(a, b)
    if a.ndim == 2:
        a = a[:, :, None]
        b = b[:, :, None]
    if a.ndim != 3:
        raise ShapeMismatchError(f"expected (H, W) or (H, W, C) images, got shape {a.shape}")
    if min(a.shape[0], a.shape[1]) < SSIM_WINDOW:
        raise ImageTooSmallError(f"images must be at least {SSIM_WINDOW} pixels per side")
    window = _gaussian_window()
    scores = [_ssim_channel(a[:, :, c], b[:, :, c], window) for c in range(a.shape[2])]
    return float(np.mean(scores))


def compare(a: NDArray[np.float64], b: NDArray[np.float64]) -> MetricReport:
    return MetricReport(psnr=psnr(a, b), ssim=ssim(a, b))
