"""Training objective: restoration loss, blurred-cosine color loss, total.

Every loss returns (value, gradient w.r.t. the predicted image) so the
training loop can chain them through the recovery equation analytically.

The blur kernel is G(k, l) = amp * exp(-k^2/(2*sigma) - l^2/(2*sigma)) with
amp = 0.053 and sigma = 3. Note the exponent divides by 2*sigma, not
2*sigma^2, and the kernel does not sum to 1; the color loss compares
angles, which are invariant to that overall scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_NORM_FLOOR = 1e-8
_COS_CLAMP = 1e-12


@dataclass(frozen=True)
class GaussianKernel:
    amplitude: float = 0.053
    sigma_x: float = 3.0
    sigma_y: float = 3.0
    radius: int = 9

    @property
    def taps_x(self) -> np.ndarray:
        k = np.arange(-self.radius, self.radius + 1, dtype=np.float64)
        return np.exp(-k * k / (2.0 * self.sigma_x))

    @property
    def taps_y(self) -> np.ndarray:
        k = np.arange(-self.radius, self.radius + 1, dtype=np.float64)
        return np.exp(-k * k / (2.0 * self.sigma_y))

    def kernel_2d(self) -> np.ndarray:
        return self.amplitude * np.outer(self.taps_y, self.taps_x)


def _conv1d_replicate(x: np.ndarray, taps: np.ndarray, axis: int) -> np.ndarray:
    r = len(taps) // 2
    n = x.shape[axis]
    idx = np.clip(np.arange(-r, n + r), 0, n - 1)
    xp = np.take(x, idx, axis=axis)
    out = np.zeros_like(x)
    for k, w in enumerate(taps):
        sl = [slice(None)] * x.ndim
        sl[axis] = slice(k, k + n)
        out += w * xp[tuple(sl)]
    return out


def _conv1d_replicate_adjoint(g: np.ndarray, taps: np.ndarray, axis: int) -> np.ndarray:
    r = len(taps) // 2
    n = g.shape[axis]
    gp_shape = list(g.shape)
    gp_shape[axis] = n + 2 * r
    gp = np.zeros(gp_shape, dtype=np.float64)
    for k, w in enumerate(taps):
        sl = [slice(None)] * g.ndim
        sl[axis] = slice(k, k + n)
        gp[tuple(sl)] += w * g
    # fold replicate-padded positions back onto their source pixels
    idx = np.clip(np.arange(-r, n + r), 0, n - 1)
    out = np.zeros_like(g)
    np.add.at(np.moveaxis(out, axis, 0), idx, np.moveaxis(gp, axis, 0))
    return out


def gaussian_blur(img: np.ndarray, kernel: GaussianKernel = GaussianKernel()) -> np.ndarray:
    """Separable 2D blur with replicate borders (kernel is not unit-sum)."""
    out = _conv1d_replicate(img, kernel.taps_y, 0)
    out = _conv1d_replicate(out, kernel.taps_x, 1)
    return kernel.amplitude * out


def gaussian_blur_adjoint(g: np.ndarray, kernel: GaussianKernel = GaussianKernel()) -> np.ndarray:
    out = _conv1d_replicate_adjoint(kernel.amplitude * g, kernel.taps_x, 1)
    return _conv1d_replicate_adjoint(out, kernel.taps_y, 0)


def restoration_loss(pred: np.ndarray, truth: np.ndarray) -> tuple[float, np.ndarray]:
    """Sum of squared per-sample errors and its gradient in pred."""
    if pred.shape != truth.shape:
        raise ValueError("prediction and truth shapes differ")
    diff = pred - truth
    return float(np.sum(diff * diff)), 2.0 * diff


def color_loss(
    pred: np.ndarray, truth: np.ndarray, kernel: GaussianKernel = GaussianKernel()
) -> tuple[float, np.ndarray]:
    """Sum over pixels of the angle between blurred RGB vectors.

    Scale-invariant: it penalizes color direction mismatch that the squared
    error cannot see. Near-black blurred vectors contribute zero.
    """
    if pred.shape != truth.shape:
        raise ValueError("prediction and truth shapes differ")
    if pred.ndim != 3:
        raise ValueError("color loss needs 3-channel images")
    u = gaussian_blur(pred, kernel)
    v = gaussian_blur(truth, kernel)
    nu = np.linalg.norm(u, axis=2)
    nv = np.linalg.norm(v, axis=2)
    valid = (nu > _NORM_FLOOR) & (nv > _NORM_FLOOR)
    nu_s = np.where(valid, nu, 1.0)
    nv_s = np.where(valid, nv, 1.0)
    dot = np.sum(u * v, axis=2)
    raw_cos = dot / (nu_s * nv_s)
    cos = np.clip(raw_cos, -1.0 + _COS_CLAMP, 1.0 - _COS_CLAMP)
    theta = np.where(valid, np.arccos(cos), 0.0)
    loss = float(np.sum(theta))

    live = valid & (np.abs(raw_cos) < 1.0 - _COS_CLAMP)
    scale = np.where(live, -1.0 / np.sqrt(1.0 - cos * cos), 0.0)
    dcos_du = v / (nu_s * nv_s)[:, :, None] - (cos / (nu_s * nu_s))[:, :, None] * u
    du = scale[:, :, None] * dcos_du
    return loss, gaussian_blur_adjoint(du, kernel)


def total_loss(
    pred: np.ndarray,
    truth: np.ndarray,
    w_c: float = 0.01,
    kernel: GaussianKernel = GaussianKernel(),
) -> tuple[float, np.ndarray]:
    """Restoration loss plus w_c times the color loss, with summed gradients."""
    lr, gr = restoration_loss(pred, truth)
    if w_c == 0.0:
        return lr, gr
    lc, gc = color_loss(pred, truth, kernel)
    return lr + w_c * lc, gr + w_c * gc
