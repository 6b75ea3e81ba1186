"""Objective image quality metrics: PSNR and SSIM."""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .image import luminance

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB on [0, 1] data; inf for identical images."""
    if a.shape != b.shape:
        raise ValueError("image shapes differ")
    mse = float(np.mean((np.asarray(a, float) - np.asarray(b, float)) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _ssim_window() -> np.ndarray:
    r = SSIM_WINDOW // 2
    k = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(k * k) / (2.0 * SSIM_SIGMA**2))
    w = np.outer(g, g)
    return w / w.sum()


def _local_means(img: np.ndarray, w: np.ndarray) -> np.ndarray:
    wins = sliding_window_view(img, w.shape)
    return np.tensordot(wins, w, axes=([2, 3], [0, 1]))


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean structural similarity on luminance, Gaussian-weighted 11x11 windows."""
    if a.shape != b.shape:
        raise ValueError("image shapes differ")
    x = luminance(a) if a.ndim == 3 else np.asarray(a, float)
    y = luminance(b) if b.ndim == 3 else np.asarray(b, float)
    if min(x.shape) < SSIM_WINDOW:
        raise ValueError(f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    w = _ssim_window()
    mx = _local_means(x, w)
    my = _local_means(y, w)
    vx = _local_means(x * x, w) - mx * mx
    vy = _local_means(y * y, w) - my * my
    cxy = _local_means(x * y, w) - mx * my
    c1 = (SSIM_K1 * 1.0) ** 2
    c2 = (SSIM_K2 * 1.0) ** 2
    num = (2 * mx * my + c1) * (2 * cxy + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return float(np.mean(num / den))
