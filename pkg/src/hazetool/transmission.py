"""Dark-channel-prior transmission estimation.

t(p) = 1 - omega * min_c min_{p' in patch} base_c(p') / A_c, optionally
refined with the weighted guided filter so the map follows image edges,
then clamped to [t_floor, 1]. Estimating from the base layer rather than
the raw image keeps sensor noise out of the patch minima.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import minimum_filter

from .image import luminance
from .wgif import WgifParams, wgif_filter

T_FLOOR = 0.05


def dark_channel(img: np.ndarray, patch_radius: int = 7) -> np.ndarray:
    """Min over channels and a (2r+1)^2 patch, replicate borders."""
    if patch_radius < 0:
        raise ValueError("patch_radius must be >= 0")
    mn = img.min(axis=2) if img.ndim == 3 else img
    if patch_radius == 0:
        return mn.copy()
    return minimum_filter(mn, size=2 * patch_radius + 1, mode="nearest")


def estimate_t_prior(
    base: np.ndarray,
    airlight: np.ndarray,
    omega: float = 0.95,
    patch_radius: int = 7,
    wgif_params: WgifParams = WgifParams(),
    t_floor: float = T_FLOOR,
    refine: bool = True,
) -> np.ndarray:
    """Dark-channel transmission map from the base layer, in [t_floor, 1]."""
    airlight = np.asarray(airlight, dtype=np.float64)
    if np.any(airlight <= 0):
        raise ValueError("airlight channels must be > 0")
    if not 0 < omega <= 1:
        raise ValueError("omega must be in (0, 1]")
    t = 1.0 - omega * dark_channel(base / airlight, patch_radius)
    if refine:
        t = wgif_filter(np.clip(t, 0.0, 1.0), luminance(base), wgif_params)
    return np.clip(t, t_floor, 1.0)
