import numpy as np
import pytest

from hazetool.bilateral import (BilateralGridModel, ModelConfig, TrainConfig,
                                estimate_t_learned, lowres_input, slice_grid,
                                slice_grid_backward, train, train_step_loss,
                                _prepare_pair)
from hazetool.losses import GaussianKernel
from hazetool.recovery import RecoveryParams, recover_fused_grad_t
from hazetool.synthesis import apply_haze, t_from_depth
from hazetool.wgif import WgifParams

from conftest import random_image

SMALL = ModelConfig(input_size=16, channels=(8, 16), grid_depth=4)


def naive_slice(grid, guidance, t_floor=0.05):
    gy, gx, d, _ = grid.shape
    h, w = guidance.shape
    t = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            fy = min(max((i + 0.5) * gy / h - 0.5, 0.0), gy - 1.0)
            fx = min(max((j + 0.5) * gx / w - 0.5, 0.0), gx - 1.0)
            fz = min(max(guidance[i, j] * d - 0.5, 0.0), d - 1.0)
            y0, x0, z0 = int(fy), int(fx), int(fz)
            y1, x1, z1 = min(y0 + 1, gy - 1), min(x0 + 1, gx - 1), min(z0 + 1, d - 1)
            wy, wx, wz = fy - y0, fx - x0, fz - z0
            acc = np.zeros(2)
            for yi, wgy in ((y0, 1 - wy), (y1, wy)):
                for xi, wgx in ((x0, 1 - wx), (x1, wx)):
                    for zi, wgz in ((z0, 1 - wz), (z1, wz)):
                        acc += wgy * wgx * wgz * grid[yi, xi, zi]
            t[i, j] = min(max(acc[0] * guidance[i, j] + acc[1], t_floor), 1.0)
    return t


def toy_pair(seed=0, size=32, beta=0.6):
    r = np.random.default_rng(seed)
    clean = r.uniform(0.0, 1.0, (size, size, 3))
    clean -= clean.min(axis=2, keepdims=True)
    depth = np.tile(np.linspace(0.0, 1.0, size), (size, 1))
    hazy = apply_haze(clean, t_from_depth(depth, beta), np.array([0.9, 0.9, 0.9]))
    return hazy, clean


class TestSlicing:
    def test_constant_grid(self, rng):
        grid = np.zeros((4, 4, 4, 2))
        grid[..., 1] = 0.6
        g = random_image(rng, 12, 12, channels=1)
        assert slice_grid(grid, g) == pytest.approx(np.full((12, 12), 0.6), abs=1e-12)

    def test_identity_affine(self, rng):
        grid = np.zeros((4, 4, 4, 2))
        grid[..., 0] = 1.0
        g = random_image(rng, 10, 10, channels=1)
        assert slice_grid(grid, g) == pytest.approx(np.clip(g, 0.05, 1.0), abs=1e-12)

    def test_matches_naive_oracle(self, rng):
        grid = rng.normal(0, 0.5, (4, 4, 4, 2))
        g = random_image(rng, 8, 8, channels=1)
        assert np.max(np.abs(slice_grid(grid, g) - naive_slice(grid, g))) <= 1e-12

    def test_partition_of_unity(self, rng):
        grid = np.ones((4, 4, 4, 2)) * 0.5  # constant coefficients
        g = random_image(rng, 16, 16, channels=1)
        t, cache = slice_grid(grid, g, want_cache=True)
        weights = sum(wgt for _, _, _, wgt in cache[0])
        assert weights == pytest.approx(np.ones((16, 16)), abs=1e-12)

    def test_backward_matches_finite_differences(self, rng):
        grid = rng.normal(0.3, 0.2, (3, 3, 3, 2))
        g = random_image(rng, 6, 6, channels=1) * 0.8 + 0.1
        dt = rng.normal(0, 1, (6, 6))
        _, cache = slice_grid(grid, g, want_cache=True)
        dgrid = slice_grid_backward(dt, cache)
        eps = 1e-7
        for idx in np.ndindex(grid.shape):
            gp = grid.copy()
            gp[idx] += eps
            hi = np.sum(dt * slice_grid(gp, g))
            gp[idx] -= 2 * eps
            lo = np.sum(dt * slice_grid(gp, g))
            fd = (hi - lo) / (2 * eps)
            assert dgrid[idx] == pytest.approx(fd, rel=1e-5, abs=1e-6)


class TestModel:
    def test_zero_params_give_floor_transmission(self, rng):
        model = BilateralGridModel.init_random(SMALL, seed=0)
        for p in model.params:
            p[...] = 0.0
        base = random_image(rng, 32, 32)
        t = estimate_t_learned(model, base)
        assert np.all(t == 0.05)

    def test_forward_determinism(self, rng):
        m1 = BilateralGridModel.init_random(SMALL, seed=5)
        m2 = BilateralGridModel.init_random(SMALL, seed=5)
        x = lowres_input(random_image(rng, 32, 32), 16)
        assert np.array_equal(m1.forward(x), m2.forward(x))

    def test_wrong_input_shape(self):
        model = BilateralGridModel.init_random(SMALL, seed=0)
        with pytest.raises(ValueError):
            model.forward(np.zeros((8, 8, 4)))

    def test_grid_shape(self, rng):
        model = BilateralGridModel.init_random(SMALL, seed=1)
        x = lowres_input(random_image(rng, 40, 40), 16)
        assert model.forward(x).shape == (4, 4, 4, 2)

    def test_parameter_jacobian_single_weight(self, rng):
        model = BilateralGridModel.init_random(SMALL, seed=2)
        x = lowres_input(random_image(rng, 32, 32), 16)
        probe = rng.normal(0, 1, (4, 4, 4, 2))
        grid, cache = model.forward(x, want_cache=True)
        grads = model.backward(cache, probe)
        delta = 1e-6
        r = np.random.default_rng(3)
        for pi in range(len(model.params)):
            flat_idx = r.integers(model.params[pi].size)
            idx = np.unravel_index(flat_idx, model.params[pi].shape)
            model.params[pi][idx] += delta
            hi = np.sum(probe * model.forward(x))
            model.params[pi][idx] -= 2 * delta
            lo = np.sum(probe * model.forward(x))
            model.params[pi][idx] += delta
            fd = (hi - lo) / (2 * delta)
            assert grads[pi][idx] == pytest.approx(fd, rel=1e-5, abs=1e-7)

    def test_serialization_round_trip(self, tmp_path):
        model = BilateralGridModel.init_random(SMALL, seed=9)
        model.save(tmp_path / "m.bin")
        back = BilateralGridModel.load(tmp_path / "m.bin")
        assert back.config == model.config
        for p, q in zip(model.params, back.params):
            assert np.array_equal(p, q)

    def test_load_rejects_garbage(self, tmp_path):
        (tmp_path / "bad.bin").write_bytes(b"not a model")
        with pytest.raises(ValueError):
            BilateralGridModel.load(tmp_path / "bad.bin")


class TestTraining:
    def test_empty_dataset(self):
        model = BilateralGridModel.init_random(SMALL, seed=0)
        with pytest.raises(ValueError):
            train(model, [], TrainConfig(steps=1))

    def test_zero_steps_leaves_model_unchanged(self):
        model = BilateralGridModel.init_random(SMALL, seed=0)
        before = [p.copy() for p in model.params]
        trace = train(model, [toy_pair()], TrainConfig(steps=0))
        assert trace == []
        for p, q in zip(model.params, before):
            assert np.array_equal(p, q)

    def test_loss_decreases_on_toy_set(self):
        model = BilateralGridModel.init_random(SMALL, seed=0)
        trace = train(model, [toy_pair()], TrainConfig(steps=120),
                      wgif_params=WgifParams(radius=4))
        assert trace[-1] < 0.8 * trace[0]

    def test_training_determinism(self):
        traces = []
        models = []
        for _ in range(2):
            model = BilateralGridModel.init_random(SMALL, seed=1)
            traces.append(train(model, [toy_pair()], TrainConfig(steps=10),
                                wgif_params=WgifParams(radius=4)))
            models.append(model)
        assert traces[0] == traces[1]
        for p, q in zip(models[0].params, models[1].params):
            assert np.array_equal(p, q)


class TestEndToEndGradient:
    def test_every_parameter_against_finite_differences(self):
        hazy, clean = toy_pair(seed=4, size=16)
        model = BilateralGridModel.init_random(SMALL, seed=6)
        wp = WgifParams(radius=4)
        rp = RecoveryParams()
        kern = GaussianKernel(radius=4)
        pair = _prepare_pair(hazy, clean, model, wp, 0.05)

        def loss_and_masks(vec):
            model.unflatten(vec)
            grid, cache = model.forward(pair.net_input, want_cache=True)
            t, scache = slice_grid(grid, pair.guidance, 0.05, want_cache=True)
            out, _, out_mask = recover_fused_grad_t(pair.layers, t, pair.airlight, rp)
            from hazetool.losses import total_loss
            loss, _ = total_loss(out, clean, 0.01, kern)
            relu_masks = tuple(m.tobytes() for _, _, m in cache[0])
            t_raw = scache[2]
            live = ((t_raw > 0.05) & (t_raw < 1.0)).tobytes()
            return loss, relu_masks + (live, out_mask.tobytes())

        theta = model.flatten()
        _, grads = train_step_loss(model, pair, rp, 0.01, kern)
        analytic = np.concatenate([g.ravel() for g in grads])

        delta = 1e-6
        skipped = 0
        for i in range(theta.size):
            v = theta.copy()
            v[i] += delta
            hi, m_hi = loss_and_masks(v)
            v[i] -= 2 * delta
            lo, m_lo = loss_and_masks(v)
            fd = (hi - lo) / (2 * delta)
            if m_hi != m_lo:
                skipped += 1  # perturbation crossed a ReLU/clamp kink
                continue
            denom = max(abs(analytic[i]) + abs(fd), 1e-6)
            assert abs(analytic[i] - fd) / denom < 1e-4, f"param {i}"
        model.unflatten(theta)
        assert skipped < 0.02 * theta.size
