"""Weighted guided image filter and base/detail decomposition.

The hazy image Z is split into Z = base + detail. The base layer is the
edge-preserving smooth obtained from per-pixel affine coefficients

    a(p) = var(Z) / (var(Z) + lam / gamma(p))
    b(p) = (1 - a(p)) * mean(Z)

where gamma is an edge-aware weight built from 3x3 luminance variances, and
the coefficients are box-averaged before being applied. Noise ends up almost
entirely in the detail layer, which is why airlight and transmission are
estimated from the base layer downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import luminance


@dataclass(frozen=True)
class WgifParams:
    radius: int = 16       # window half-size, window is (2r+1)^2
    lam: float = 1e-3      # regularization, for intensities in [0, 1]
    eps: float = 1e-6      # variance floor in the edge weight

    def __post_init__(self):
        if self.radius < 1:
            raise ValueError("radius must be >= 1")
        if self.lam <= 0 or self.eps <= 0:
            raise ValueError("lam and eps must be > 0")


@dataclass(frozen=True)
class LayerPair:
    """Base/detail split with base + detail == original exactly."""

    base: np.ndarray    # in [0, 1]
    detail: np.ndarray  # signed residual

    def reconstruct(self) -> np.ndarray:
        return self.base + self.detail


def _window_sum(arr: np.ndarray, radius: int, axis: int) -> np.ndarray:
    """Running sum over a (2r+1) window along one axis of an edge-padded array."""
    w = 2 * radius + 1
    c = np.cumsum(arr, axis=axis)
    first = np.take(c, [w - 1], axis=axis)
    hi = np.take(c, range(w, arr.shape[axis]), axis=axis)
    lo = np.take(c, range(0, arr.shape[axis] - w), axis=axis)
    return np.concatenate([first, hi - lo], axis=axis)


def box_mean(img: np.ndarray, radius: int) -> np.ndarray:
    """Mean over (2r+1)^2 windows with replicate padding, via running sums."""
    pad = [(radius, radius), (radius, radius)] + [(0, 0)] * (img.ndim - 2)
    padded = np.pad(img, pad, mode="edge")
    s = _window_sum(_window_sum(padded, radius, 0), radius, 1)
    return s / float((2 * radius + 1) ** 2)


def local_stats(img: np.ndarray, radius: int) -> tuple[np.ndarray, np.ndarray]:
    """Windowed mean and variance (biased, clipped at 0)."""
    mu = box_mean(img, radius)
    var = box_mean(img * img, radius) - mu * mu
    return mu, np.maximum(var, 0.0)


def edge_weight(y: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Edge-aware weight from 3x3 luminance variances, normalized to mean ~1.

    Flat regions get weights below 1 (stronger smoothing), edges above 1.
    """
    if y.ndim != 2:
        raise ValueError("edge_weight expects a single-channel luminance image")
    _, var = local_stats(y, 1)
    return (var + eps) * np.mean(1.0 / (var + eps))


def wgif_filter(img: np.ndarray, guide: np.ndarray, params: WgifParams = WgifParams()) -> np.ndarray:
    """Edge-weighted guided smoothing of img, edges taken from the guide luminance."""
    if guide.ndim != 2 or img.shape[:2] != guide.shape:
        raise ValueError(f"guide shape {guide.shape} does not match image {img.shape[:2]}")
    gamma = edge_weight(guide, params.eps)
    if img.ndim == 3:
        gamma = gamma[:, :, None]
    mu, var = local_stats(img, params.radius)
    a = var / (var + params.lam / gamma)
    b = (1.0 - a) * mu
    out = box_mean(a, params.radius) * img + box_mean(b, params.radius)
    return np.clip(out, 0.0, 1.0)


def decompose(img: np.ndarray, params: WgifParams = WgifParams()) -> LayerPair:
    """Split a 3-channel image into base and detail layers (exact sum)."""
    if img.ndim != 3:
        raise ValueError("decompose expects a 3-channel image")
    base = wgif_filter(img, luminance(img), params)
    return LayerPair(base=base, detail=img - base)
