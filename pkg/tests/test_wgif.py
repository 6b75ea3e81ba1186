import numpy as np
import pytest

from hazetool.image import luminance
from hazetool.synthesis import add_noise
from hazetool.wgif import (WgifParams, box_mean, decompose, edge_weight,
                           local_stats, wgif_filter)

from conftest import random_image


def naive_box_mean(img, r):
    h, w = img.shape[:2]
    out = np.zeros_like(img, dtype=np.float64)
    for i in range(h):
        for j in range(w):
            acc = 0.0 if img.ndim == 2 else np.zeros(img.shape[2])
            for di in range(-r, r + 1):
                for dj in range(-r, r + 1):
                    acc = acc + img[np.clip(i + di, 0, h - 1), np.clip(j + dj, 0, w - 1)]
            out[i, j] = acc / (2 * r + 1) ** 2
    return out


def naive_stats(img, r):
    mu = naive_box_mean(img, r)
    var = np.maximum(naive_box_mean(img * img, r) - mu * mu, 0.0)
    return mu, var


def naive_edge_weight(y, eps):
    _, var = naive_stats(y, 1)
    return (var + eps) * np.mean(1.0 / (var + eps))


def naive_wgif(img, guide, p):
    gamma = naive_edge_weight(guide, p.eps)
    if img.ndim == 3:
        gamma = gamma[:, :, None]
    mu, var = naive_stats(img, p.radius)
    a = var / (var + p.lam / gamma)
    b = (1.0 - a) * mu
    out = naive_box_mean(a, p.radius) * img + naive_box_mean(b, p.radius)
    return np.clip(out, 0.0, 1.0)


def naive_unweighted_guided(img, p):
    mu, var = naive_stats(img, p.radius)
    a = var / (var + p.lam)
    b = (1.0 - a) * mu
    return np.clip(naive_box_mean(a, p.radius) * img + naive_box_mean(b, p.radius), 0.0, 1.0)


class TestBoxFilter:
    @pytest.mark.parametrize("radius", [1, 3, 7])
    def test_matches_naive_2d(self, rng, radius):
        img = random_image(rng, 64, 64, channels=1)
        assert np.max(np.abs(box_mean(img, radius) - naive_box_mean(img, radius))) <= 1e-10

    def test_matches_naive_3d(self, rng):
        img = random_image(rng, 32, 32)
        assert np.max(np.abs(box_mean(img, 4) - naive_box_mean(img, 4))) <= 1e-10

    def test_variance_nonnegative(self, rng):
        _, var = local_stats(random_image(rng, 32, 32, channels=1), 5)
        assert np.all(var >= 0.0)


class TestEdgeWeight:
    def test_constant_image(self):
        g = edge_weight(np.full((16, 16), 0.4))
        assert g == pytest.approx(np.ones((16, 16)))

    def test_matches_naive(self, rng):
        y = random_image(rng, 16, 16, channels=1)
        assert edge_weight(y, 1e-6) == pytest.approx(naive_edge_weight(y, 1e-6), abs=1e-10)

    def test_edge_above_one_flat_below(self):
        y = np.full((16, 16), 0.2)
        y[:, 8:] = 0.8
        g = edge_weight(y, 1e-6)
        assert np.all(g[:, 7:9] > 1.0)
        assert np.all(g[:, :5] < 1.0) and np.all(g[:, 12:] < 1.0)

    def test_shift_invariance(self, rng):
        y = random_image(rng, 12, 12, channels=1) * 0.5
        assert edge_weight(y) == pytest.approx(edge_weight(y + 0.3), abs=1e-8)


class TestWgifFilter:
    def test_constant_input(self):
        img = np.full((20, 20, 3), 0.6)
        out = wgif_filter(img, luminance(img), WgifParams(radius=3))
        assert out == pytest.approx(img, abs=1e-12)

    def test_small_lambda_passthrough(self, rng):
        img = random_image(rng, 24, 24)
        out = wgif_filter(img, luminance(img), WgifParams(radius=3, lam=1e-12))
        assert np.max(np.abs(out - img)) < 1e-7

    def test_matches_naive_oracle(self, rng):
        img = random_image(rng, 32, 32)
        img[:, 16:] = np.clip(img[:, 16:] + 0.4, 0, 1)  # step edge content
        p = WgifParams(radius=4, lam=1e-3, eps=1e-6)
        guide = luminance(img)
        assert np.max(np.abs(wgif_filter(img, guide, p) - naive_wgif(img, guide, p))) <= 1e-10

    def test_gamma_one_reduces_to_guided_filter(self, rng):
        img = random_image(rng, 24, 24)
        p = WgifParams(radius=3, lam=2e-3)
        # constant guide -> zero local variance -> gamma identically 1
        out = wgif_filter(img, np.full(img.shape[:2], 0.5), p)
        assert np.max(np.abs(out - naive_unweighted_guided(img, p))) <= 1e-10

    def test_shape_mismatch(self, rng):
        with pytest.raises(ValueError):
            wgif_filter(random_image(rng, 8, 8), np.zeros((4, 4)))


class TestDecompose:
    def test_constant_detail_zero(self):
        layers = decompose(np.full((16, 16, 3), 0.4), WgifParams(radius=3))
        assert np.max(np.abs(layers.detail)) <= 1e-12

    def test_exact_reconstruction(self, rng):
        img = random_image(rng, 32, 32)
        layers = decompose(img, WgifParams(radius=5))
        assert np.max(np.abs(layers.reconstruct() - img)) <= 1e-12

    def test_noise_lives_in_detail(self):
        sigma = 0.02
        p = WgifParams(radius=16, lam=0.02)
        ratios = []
        for seed in range(20):
            noisy = add_noise(np.full((64, 64, 3), 0.5), sigma, seed=seed)
            layers = decompose(noisy, p)
            inner = layers.detail[16:48, 16:48]
            ratios.append(np.var(inner) / sigma**2)
        assert np.mean(ratios) >= 0.8

    def test_edge_preservation_with_noise(self):
        sigma = 0.05
        step = np.full((64, 64, 3), 0.25)
        step[:, 32:] = 0.75
        noisy = add_noise(step, sigma, seed=0)
        layers = decompose(noisy, WgifParams(radius=8, lam=0.01))
        left = layers.base[:, 26:30].mean()
        right = layers.base[:, 34:38].mean()
        assert right - left >= 0.9 * 0.5
        flat_var = np.var(layers.base[8:56, 4:16])
        assert flat_var <= 0.1 * sigma**2

    def test_single_channel_rejected(self):
        with pytest.raises(ValueError):
            decompose(np.zeros((8, 8)))
