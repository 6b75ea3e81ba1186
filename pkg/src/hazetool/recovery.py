"""Haze-free image reconstruction.

recover_classic inverts the scattering model directly; recover_fused gates
the detail layer with a sigmoid of the transmission so that in sky or dense
haze (small t) only the base layer is amplified and detail-layer noise
passes through unamplified.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .wgif import LayerPair


@dataclass(frozen=True)
class RecoveryParams:
    t0: float = 0.1      # transmission clamp floor in the divisor
    eta: float = 4.0     # gate midpoint is at t = 1/eta
    slope: float = 32.0  # gate sharpness

    def __post_init__(self):
        if not 0 < self.t0 < 1:
            raise ValueError("t0 must be in (0, 1)")
        if self.eta <= 1:
            raise ValueError("eta must be > 1")


def _expand(a: np.ndarray) -> np.ndarray:
    return np.asarray(a, dtype=np.float64)[None, None, :]


def recover_classic(hazy, t, airlight, t0: float = 0.1, clip: bool = True) -> np.ndarray:
    """I = (Z - A) / max(t, t0) + A, per channel."""
    if hazy.shape[:2] != t.shape:
        raise ValueError("image and transmission shapes differ")
    a = _expand(airlight)
    out = (hazy - a) / np.maximum(t, t0)[:, :, None] + a
    return np.clip(out, 0.0, 1.0) if clip else out


def gate(t, eta: float = 4.0, slope: float = 32.0):
    """Sigmoid weight: ~0 below t = 1/eta (dense haze), ~1 above."""
    return 1.0 / (1.0 + np.exp(slope * (1.0 - eta * np.asarray(t, dtype=np.float64))))


def recover_fused(
    layers: LayerPair, t, airlight, params: RecoveryParams = RecoveryParams(), clip: bool = True
) -> np.ndarray:
    """Adaptive recovery: detail is amplified only where the gate opens."""
    if layers.base.shape[:2] != t.shape:
        raise ValueError("layers and transmission shapes differ")
    a = _expand(airlight)
    psi = gate(t, params.eta, params.slope)[:, :, None]
    m = np.maximum(t, params.t0)[:, :, None]
    out = (layers.base + psi * layers.detail - a) / m + (1.0 - psi) * layers.detail + a
    return np.clip(out, 0.0, 1.0) if clip else out


def recover_fused_grad_t(
    layers: LayerPair, t, airlight, params: RecoveryParams = RecoveryParams()
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fused recovery plus its derivative in t, for training.

    Returns (clipped output, d out/d t per channel, mask of unclipped samples).
    The derivative is of the pre-clip expression; zero it with the mask.
    """
    a = _expand(airlight)
    tt = t[:, :, None]
    psi = gate(t, params.eta, params.slope)[:, :, None]
    dpsi = params.slope * params.eta * psi * (1.0 - psi)
    m = np.maximum(tt, params.t0)
    dm = (tt > params.t0).astype(np.float64)
    num = layers.base + psi * layers.detail - a
    pre = num / m + (1.0 - psi) * layers.detail + a
    grad = (dpsi * layers.detail * m - num * dm) / (m * m) - dpsi * layers.detail
    mask = (pre > 0.0) & (pre < 1.0)
    return np.clip(pre, 0.0, 1.0), grad, mask


def noise_amplification_map(t, t0: float = 0.1, normalized: bool = False) -> np.ndarray:
    """Per-pixel noise gain 1 / max(t, t0); normalized variant scales by t0."""
    gain = 1.0 / np.maximum(np.asarray(t, dtype=np.float64), t0)
    return gain * t0 if normalized else gain
