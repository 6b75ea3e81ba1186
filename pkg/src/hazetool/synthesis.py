"""Forward haze model for dataset generation and round-trip tests.

hazy = clean * t + A * (1 - t), with t = exp(-beta * depth) and optional
additive Gaussian sensor noise.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from .transmission import T_FLOOR

BETA_RANGE = (0.5, 2.5)
AIRLIGHT_RANGE = (0.7, 1.0)


def t_from_depth(depth: np.ndarray, beta: float = 1.0, t_floor: float = T_FLOOR) -> np.ndarray:
    """Beer-Lambert transmission exp(-beta * depth), clamped to [t_floor, 1]."""
    if beta <= 0:
        raise ValueError("beta must be > 0")
    depth = np.asarray(depth, dtype=np.float64)
    return np.clip(np.exp(-beta * depth), t_floor, 1.0)


def apply_haze(clean: np.ndarray, t: np.ndarray, airlight) -> np.ndarray:
    """Scattering-model composition; a convex blend, so output stays in [0, 1]."""
    if clean.shape[:2] != t.shape:
        raise ValueError("image and transmission shapes differ")
    a = np.asarray(airlight, dtype=np.float64)
    tt = t[:, :, None] if clean.ndim == 3 else t
    return clean * tt + a * (1.0 - tt)


def add_noise(img: np.ndarray, sigma: float, seed: int = 0) -> np.ndarray:
    """I.i.d. Gaussian noise from a seeded 64-bit PRNG, clipped to [0, 1]."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return img.copy()
    rng = np.random.default_rng(seed)
    return np.clip(img + rng.normal(0.0, sigma, img.shape), 0.0, 1.0)


def random_depth(height: int, width: int, rng: np.random.Generator, smooth: float = 8.0) -> np.ndarray:
    """Smooth random depth field normalized to [0, 1], for synthetic scenes."""
    d = gaussian_filter(rng.standard_normal((height, width)), smooth, mode="nearest")
    lo, hi = d.min(), d.max()
    if hi - lo < 1e-12:
        return np.zeros((height, width))
    return (d - lo) / (hi - lo)


def sample_haze_params(rng: np.random.Generator) -> tuple[float, np.ndarray]:
    """Random (beta, airlight) for dataset generation."""
    beta = rng.uniform(*BETA_RANGE)
    airlight = rng.uniform(AIRLIGHT_RANGE[0], AIRLIGHT_RANGE[1], size=3)
    return float(beta), airlight
