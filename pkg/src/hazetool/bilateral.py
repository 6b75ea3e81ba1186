"""Learned transmission estimation through a bilateral grid.

A small strided convnet runs on the downsampled base layer (RGB plus
luminance) and emits a coarse 3D grid of affine (slope, offset) pairs.
Slicing trilinearly interpolates those pairs at every full-resolution pixel
using its luminance as the third grid coordinate, so the heavy computation
stays in the low-res domain while the transmission map is produced at full
resolution as a locally affine function of luminance.

Forward and backward passes are hand-written in numpy; training
backpropagates the image-space loss through the adaptive recovery equation
and the slicing into the network parameters, with Adam updates. Everything
is float64 so gradients can be checked against finite differences.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .airlight import estimate_airlight
from .image import luminance, resize
from .losses import GaussianKernel, total_loss
from .recovery import RecoveryParams, recover_fused_grad_t
from .transmission import T_FLOOR
from .wgif import WgifParams, decompose

_MAGIC = b"HZBGRID1"


@dataclass(frozen=True)
class ModelConfig:
    input_size: int = 256
    channels: tuple[int, ...] = (8, 16, 32, 64)
    grid_depth: int = 8
    in_channels: int = 4  # base RGB + luminance

    def __post_init__(self):
        if self.input_size % (2 ** len(self.channels)) != 0:
            raise ValueError("input_size must be divisible by 2^len(channels)")

    @property
    def grid_size(self) -> int:
        return self.input_size // (2 ** len(self.channels))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    steps: int = 1000
    w_c: float = 0.01
    rng_seed: int = 0
    batch: int = 1

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.w_c < 0:
            raise ValueError("w_c must be >= 0")


def _conv_forward(x, w, b):
    """3x3 conv, stride 2, zero pad 1. x: (H, W, Cin), w: (Cout, Cin, 3, 3)."""
    xp = np.pad(x, ((1, 1), (1, 1), (0, 0)))
    wins = sliding_window_view(xp, (3, 3), axis=(0, 1))[::2, ::2]  # (Ho, Wo, Cin, 3, 3)
    y = np.tensordot(wins, w, axes=([2, 3, 4], [1, 2, 3])) + b
    return y, wins


def _conv_backward(dy, wins, w, in_shape):
    dw = np.tensordot(dy, wins, axes=([0, 1], [0, 1]))  # (Cout, Cin, 3, 3)
    db = dy.sum(axis=(0, 1))
    dwins = np.tensordot(dy, w, axes=([2], [0]))  # (Ho, Wo, Cin, 3, 3)
    ho, wo = dy.shape[:2]
    dxp = np.zeros((in_shape[0] + 2, in_shape[1] + 2, in_shape[2]))
    for ki in range(3):
        for kj in range(3):
            dxp[ki:ki + 2 * ho:2, kj:kj + 2 * wo:2] += dwins[:, :, :, ki, kj]
    return dw, db, dxp[1:-1, 1:-1]


class BilateralGridModel:
    """Strided convnet + per-cell linear head producing the affine grid."""

    def __init__(self, config: ModelConfig, params: list[np.ndarray]):
        self.config = config
        self.params = params  # [w0, b0, w1, b1, ..., head_w, head_b]

    @classmethod
    def init_random(cls, config: ModelConfig = ModelConfig(), seed: int = 0) -> "BilateralGridModel":
        rng = np.random.default_rng(seed)
        params: list[np.ndarray] = []
        cin = config.in_channels
        for cout in config.channels:
            std = np.sqrt(2.0 / (cin * 9))
            params.append(rng.normal(0.0, std, (cout, cin, 3, 3)))
            params.append(np.zeros(cout))
            cin = cout
        head_w = np.zeros((cin, config.grid_depth, 2))
        head_w[:, :, 0] = rng.normal(0.0, 0.01, (cin, config.grid_depth))
        head_b = np.zeros((config.grid_depth, 2))
        head_b[:, 1] = 0.5  # start from a mid-range constant transmission
        params += [head_w, head_b]
        return cls(config, params)

    def forward(self, x: np.ndarray, want_cache: bool = False):
        """Low-res 4-channel input -> (G, G, D, 2) grid of affine coefficients."""
        s = self.config.input_size
        if x.shape != (s, s, self.config.in_channels):
            raise ValueError(f"expected input shape {(s, s, self.config.in_channels)}, got {x.shape}")
        cache = []
        h = x
        n = len(self.config.channels)
        for i in range(n):
            w, b = self.params[2 * i], self.params[2 * i + 1]
            pre, wins = _conv_forward(h, w, b)
            mask = pre > 0
            cache.append((h.shape, wins, mask))
            h = np.where(mask, pre, 0.0)
        head_w, head_b = self.params[2 * n], self.params[2 * n + 1]
        grid = np.tensordot(h, head_w, axes=([2], [0])) + head_b
        if want_cache:
            return grid, (cache, h)
        return grid

    def backward(self, cache, dgrid: np.ndarray) -> list[np.ndarray]:
        """Gradients of a scalar loss given d loss / d grid, same layout as params."""
        conv_cache, feat = cache
        n = len(self.config.channels)
        head_w = self.params[2 * n]
        dhead_w = np.tensordot(feat, dgrid, axes=([0, 1], [0, 1]))
        dhead_b = dgrid.sum(axis=(0, 1))
        dh = np.tensordot(dgrid, head_w, axes=([2, 3], [1, 2]))
        grads: list[np.ndarray] = [dhead_w, dhead_b]
        for i in range(n - 1, -1, -1):
            in_shape, wins, mask = conv_cache[i]
            dpre = np.where(mask, dh, 0.0)
            dw, db, dh = _conv_backward(dpre, wins, self.params[2 * i], in_shape)
            grads = [dw, db] + grads
        return grads

    # -- flat parameter vector helpers (used by the gradient checks) --

    def flatten(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params])

    def unflatten(self, vec: np.ndarray) -> None:
        off = 0
        for p in self.params:
            p[...] = vec[off:off + p.size].reshape(p.shape)
            off += p.size

    # -- serialization: magic, dims, then little-endian float64 parameters --

    def save(self, path) -> None:
        cfg = self.config
        with open(path, "wb") as f:
            f.write(_MAGIC)
            f.write(struct.pack("<IIII", cfg.input_size, cfg.grid_depth,
                                cfg.in_channels, len(cfg.channels)))
            f.write(struct.pack(f"<{len(cfg.channels)}I", *cfg.channels))
            for p in self.params:
                f.write(np.ascontiguousarray(p, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "BilateralGridModel":
        with open(path, "rb") as f:
            if f.read(len(_MAGIC)) != _MAGIC:
                raise ValueError(f"{path}: not a bilateral grid model file")
            size, depth, cin, nconv = struct.unpack("<IIII", f.read(16))
            channels = struct.unpack(f"<{nconv}I", f.read(4 * nconv))
            config = ModelConfig(size, tuple(channels), depth, cin)
            model = cls.init_random(config, seed=0)
            for p in model.params:
                buf = f.read(8 * p.size)
                if len(buf) != 8 * p.size:
                    raise ValueError(f"{path}: truncated model file")
                p[...] = np.frombuffer(buf, dtype="<f8").reshape(p.shape)
        return model


def slice_grid(grid: np.ndarray, guidance: np.ndarray, t_floor: float = T_FLOOR,
               want_cache: bool = False):
    """Trilinear slicing of the affine grid into a full-res transmission map.

    Grid cells are indexed with half-pixel-centered spatial coordinates and
    guidance * depth - 0.5 on the intensity axis; t = clamp(a*g + b, t_floor, 1).
    """
    gy, gx, d, _ = grid.shape
    h, w = guidance.shape
    fy = np.clip((np.arange(h) + 0.5) * gy / h - 0.5, 0.0, gy - 1.0)[:, None]
    fx = np.clip((np.arange(w) + 0.5) * gx / w - 0.5, 0.0, gx - 1.0)[None, :]
    fz = np.clip(guidance * d - 0.5, 0.0, d - 1.0)
    y0 = np.minimum(fy.astype(int), gy - 1)
    x0 = np.minimum(fx.astype(int), gx - 1)
    z0 = np.minimum(fz.astype(int), d - 1)
    y1 = np.minimum(y0 + 1, gy - 1)
    x1 = np.minimum(x0 + 1, gx - 1)
    z1 = np.minimum(z0 + 1, d - 1)
    wy = np.broadcast_to(fy - y0, (h, w))
    wx = np.broadcast_to(fx - x0, (h, w))
    wz = fz - z0
    y0b = np.broadcast_to(y0, (h, w))
    y1b = np.broadcast_to(y1, (h, w))
    x0b = np.broadcast_to(x0, (h, w))
    x1b = np.broadcast_to(x1, (h, w))

    corners = []
    coef = np.zeros((h, w, 2))
    for yi, wgy in ((y0b, 1.0 - wy), (y1b, wy)):
        for xi, wgx in ((x0b, 1.0 - wx), (x1b, wx)):
            for zi, wgz in ((z0, 1.0 - wz), (z1, wz)):
                wgt = wgy * wgx * wgz
                coef += wgt[:, :, None] * grid[yi, xi, zi]
                corners.append((yi, xi, zi, wgt))
    a, b = coef[:, :, 0], coef[:, :, 1]
    t_raw = a * guidance + b
    t = np.clip(t_raw, t_floor, 1.0)
    if want_cache:
        return t, (corners, guidance, t_raw, t_floor, grid.shape)
    return t


def slice_grid_backward(dt: np.ndarray, cache) -> np.ndarray:
    """Gradient w.r.t. the grid; the clamp passes zero gradient outside."""
    corners, guidance, t_raw, t_floor, grid_shape = cache
    live = (t_raw > t_floor) & (t_raw < 1.0)
    dt_raw = np.where(live, dt, 0.0)
    da = dt_raw * guidance
    db = dt_raw
    dgrid = np.zeros(grid_shape)
    for yi, xi, zi, wgt in corners:
        np.add.at(dgrid, (yi, xi, zi, 0), wgt * da)
        np.add.at(dgrid, (yi, xi, zi, 1), wgt * db)
    return dgrid


def lowres_input(base: np.ndarray, input_size: int) -> np.ndarray:
    """Downsampled base layer stacked with its luminance, the network input."""
    low = resize(base, input_size, input_size)
    return np.concatenate([low, luminance(low)[:, :, None]], axis=2)


def estimate_t_learned(model: BilateralGridModel, base: np.ndarray,
                       t_floor: float = T_FLOOR) -> np.ndarray:
    """Full-res transmission: predict the grid at low res, slice at full res."""
    grid = model.forward(lowres_input(base, model.config.input_size))
    return slice_grid(grid, luminance(base), t_floor)


class _Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            mhat = m / (1 - self.b1**self.t)
            vhat = v / (1 - self.b2**self.t)
            p -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


@dataclass
class _PairCache:
    layers: object
    airlight: np.ndarray
    guidance: np.ndarray
    net_input: np.ndarray
    clean: np.ndarray


def _prepare_pair(hazy, clean, model, wgif_params, t_floor):
    layers = decompose(hazy, wgif_params)
    return _PairCache(
        layers=layers,
        airlight=estimate_airlight(layers.base),
        guidance=luminance(layers.base),
        net_input=lowres_input(layers.base, model.config.input_size),
        clean=clean,
    )


def train_step_loss(model, pair: _PairCache, recovery_params: RecoveryParams,
                    w_c: float, kernel: GaussianKernel, t_floor: float = T_FLOOR):
    """Single forward/backward pass; returns (loss, parameter gradients)."""
    grid, cache = model.forward(pair.net_input, want_cache=True)
    t, scache = slice_grid(grid, pair.guidance, t_floor, want_cache=True)
    out, dout_dt, out_mask = recover_fused_grad_t(pair.layers, t, pair.airlight, recovery_params)
    loss, dloss_dout = total_loss(out, pair.clean, w_c, kernel)
    dloss_dout = np.where(out_mask, dloss_dout, 0.0)
    dloss_dt = np.sum(dloss_dout * dout_dt, axis=2)
    dgrid = slice_grid_backward(dloss_dt, scache)
    return loss, model.backward(cache, dgrid)


def train(
    model: BilateralGridModel,
    dataset: list[tuple[np.ndarray, np.ndarray]],
    cfg: TrainConfig = TrainConfig(),
    wgif_params: WgifParams = WgifParams(),
    recovery_params: RecoveryParams = RecoveryParams(),
    kernel: GaussianKernel = GaussianKernel(),
) -> list[float]:
    """End-to-end training through the recovery equation; returns the loss trace.

    Decomposition, airlight and guidance are computed once per pair and held
    constant; gradients flow only through the predicted transmission.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    pairs = [_prepare_pair(h, c, model, wgif_params, T_FLOOR) for h, c in dataset]
    opt = _Adam(model.params, cfg.learning_rate)
    trace: list[float] = []
    for step in range(cfg.steps):
        total = 0.0
        grads = [np.zeros_like(p) for p in model.params]
        for k in range(cfg.batch):
            pair = pairs[(step * cfg.batch + k) % len(pairs)]
            loss, g = train_step_loss(model, pair, recovery_params, cfg.w_c, kernel)
            total += loss
            for acc, gi in zip(grads, g):
                acc += gi
        if not np.isfinite(total):
            raise RuntimeError(f"non-finite loss {total} at step {step}")
        opt.step(model.params, grads)
        trace.append(total / cfg.batch)
    return trace
