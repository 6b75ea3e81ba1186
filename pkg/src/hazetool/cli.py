"""Command-line front end.

Subcommands: dehaze, decompose, airlight, synthesize, train, evaluate,
noise-analyze, prepare. Exit codes: 0 success, 1 processing failure,
2 usage error. `--config FILE` loads key=value defaults that explicit
flags override.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import bilateral, report
from .airlight import estimate_airlight, quadtree_path
from .config import DEFAULTS, ConfigError, parse_config, resolve
from .dataset import list_pairs, load_pairs, prepare_dataset
from .image import load_depth, load_image, luminance, save_image
from .losses import color_loss, restoration_loss
from .metrics import psnr, ssim
from .recovery import (RecoveryParams, noise_amplification_map, recover_classic,
                       recover_fused)
from .synthesis import add_noise, apply_haze, random_depth, sample_haze_params, t_from_depth
from .transmission import estimate_t_prior
from .wgif import WgifParams, decompose


def _add_config_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file (flags take precedence)")


def _add_wgif_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--radius", type=int, help="WGIF window half-size")
    p.add_argument("--lambda", dest="lam", type=float, help="WGIF regularization")
    p.add_argument("--eps", type=float, help="WGIF edge-weight floor")


def _settings(args: argparse.Namespace) -> dict:
    cfg = parse_config(args.config) if getattr(args, "config", None) else {}
    out = {}
    for key in DEFAULTS:
        out[key] = resolve(key, getattr(args, key, None), cfg)
    return out


def _wgif_params(s: dict) -> WgifParams:
    return WgifParams(radius=s["radius"], lam=s["lam"], eps=s["eps"])


def _estimate_t(args, s, layers):
    a = estimate_airlight(layers.base, s["min_block"])
    if args.estimator == "learned":
        if not args.model:
            raise ValueError("--estimator learned requires --model")
        model = bilateral.BilateralGridModel.load(args.model)
        t = bilateral.estimate_t_learned(model, layers.base, s["t_floor"])
    else:
        t = estimate_t_prior(layers.base, a, s["omega"], s["patch_radius"],
                             _wgif_params(s), s["t_floor"])
    return t, a


def cmd_dehaze(args) -> int:
    s = _settings(args)
    img = load_image(args.input)
    if img.ndim != 3:
        raise ValueError(f"{args.input}: dehazing needs a color image")
    layers = decompose(img, _wgif_params(s))
    t, a = _estimate_t(args, s, layers)
    params = RecoveryParams(t0=s["t0"], eta=s["eta"])
    if args.classic:
        out = recover_classic(img, t, a, params.t0)
    else:
        out = recover_fused(layers, t, a, params)
    out_path = args.output or f"{Path(args.input).stem}_dehazed.png"
    save_image(out, out_path)
    if args.dump_t:
        save_image(t, args.dump_t)
    if args.dump_gain:
        save_image(noise_amplification_map(t, params.t0, normalized=True), args.dump_gain)
    return 0


def cmd_decompose(args) -> int:
    s = _settings(args)
    img = load_image(args.input)
    layers = decompose(img, _wgif_params(s))
    stem = Path(args.input).stem
    out_dir = Path(args.output_dir or Path(args.input).parent)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_image(layers.base, out_dir / f"{stem}_base.png")
    save_image(np.clip(0.5 + layers.detail / 2.0, 0.0, 1.0), out_dir / f"{stem}_detail.png")
    return 0


def cmd_airlight(args) -> int:
    s = _settings(args)
    img = load_image(args.input)
    layers = decompose(img, _wgif_params(s))
    a = estimate_airlight(layers.base, s["min_block"])
    print(f"A = ({a[0]:.6f}, {a[1]:.6f}, {a[2]:.6f})")
    if args.debug:
        dbg = img.copy()
        for top, left, h, w in quadtree_path(luminance(layers.base), s["min_block"]):
            dbg[top:top + h, [left, left + w - 1]] = [1.0, 0.0, 0.0]
            dbg[[top, top + h - 1], left:left + w] = [1.0, 0.0, 0.0]
        save_image(dbg, args.debug)
    return 0


def cmd_synthesize(args) -> int:
    s = _settings(args)
    clean_dir = Path(args.clean)
    out = Path(args.out)
    (out / "hazy").mkdir(parents=True, exist_ok=True)
    (out / "clean").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(s["seed"])
    files = sorted(p for p in clean_dir.iterdir() if p.suffix.lower() in (".png", ".ppm"))
    if not files:
        raise FileNotFoundError(f"no images under {clean_dir}")
    for i, path in enumerate(files):
        clean = load_image(path)
        beta, airlight = sample_haze_params(rng)
        if args.beta is not None:
            beta = args.beta
        if args.airlight is not None:
            airlight = np.full(3, args.airlight)
        if args.depth:
            depth = load_depth(Path(args.depth) / f"{path.stem}.png")
        else:
            depth = random_depth(*clean.shape[:2], rng)
        hazy = apply_haze(clean, t_from_depth(depth, beta, s["t_floor"]), airlight)
        if args.noise_sigma:
            hazy = add_noise(hazy, args.noise_sigma, seed=s["seed"] * 100003 + i)
        save_image(hazy, out / "hazy" / f"{path.stem}.png")
        save_image(clean, out / "clean" / f"{path.stem}.png")
    return 0


def cmd_train(args) -> int:
    s = _settings(args)
    channels = tuple(int(c) for c in args.channels.split(","))
    config = bilateral.ModelConfig(input_size=s["input_size"], channels=channels,
                                   grid_depth=s["grid_depth"])
    model = bilateral.BilateralGridModel.init_random(config, seed=s["seed"])
    dataset = load_pairs(args.data)
    cfg = bilateral.TrainConfig(learning_rate=s["lr"], steps=s["steps"],
                                w_c=s["w_c"], rng_seed=s["seed"])
    trace = bilateral.train(model, dataset, cfg, _wgif_params(s),
                            RecoveryParams(t0=s["t0"], eta=s["eta"]))
    model.save(args.out)
    print(f"steps={len(trace)} initial_loss={trace[0]:.6f} final_loss={trace[-1]:.6f}")
    if args.plot:
        report.save_loss_curve(trace, args.plot)
    return 0


def cmd_evaluate(args) -> int:
    s = _settings(args)
    if args.loss:
        pred = load_image(args.loss[0])
        truth = load_image(args.loss[1])
        lr, _ = restoration_loss(pred, truth)
        lc, _ = color_loss(pred, truth)
        print(f"L_r = {lr:.6f}")
        print(f"L_c = {lc:.6f}")
        print(f"L = {lr + s['w_c'] * lc:.6f}")
        return 0
    if not args.pairs:
        raise ValueError("evaluate needs either --loss PRED TRUTH or --pairs DIR")
    root = Path(args.pairs)
    first = "pred" if (root / "pred").is_dir() else "hazy"
    rows = []
    for pred_path, clean_path in list_pairs(root, first, "clean"):
        a, b = load_image(pred_path), load_image(clean_path)
        rows.append((pred_path.stem, ssim(a, b), psnr(a, b)))
    out = args.output or "metrics.csv"
    with open(out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["name", "ssim", "psnr"])
        for name, sv, pv in rows:
            w.writerow([name, f"{sv:.6f}", "inf" if pv == float("inf") else f"{pv:.4f}"])
    print(f"wrote {out} ({len(rows)} pairs)")
    if args.figures:
        fig_dir = Path(args.figures)
        fig_dir.mkdir(parents=True, exist_ok=True)
        report.save_metrics_figure(rows, fig_dir / "metrics.png")
    return 0


def cmd_noise_analyze(args) -> int:
    """Flat-scene noise amplification experiment: classic vs fused recovery."""
    s = _settings(args)
    sigma = args.sigma
    t_values = [float(v) for v in args.t.split(",")]
    size = 64
    airlight = np.array([0.8, 0.8, 0.8])
    wp = WgifParams(radius=s["radius"], lam=args.noise_lambda, eps=s["eps"])
    params = RecoveryParams(t0=s["t0"], eta=s["eta"])
    sl = slice(16, 48)  # interior, away from filter borders
    rows = []
    for t in t_values:
        tmap = np.full((size, size), t)
        flat = apply_haze(np.full((size, size, 3), 0.4), tmap, airlight)
        vc, vf = [], []
        for seed in range(args.seeds):
            noisy = add_noise(flat, sigma, seed=1000 + seed)
            out_c = recover_classic(noisy, tmap, airlight, params.t0, clip=False)
            out_f = recover_fused(decompose(noisy, wp), tmap, airlight, params, clip=False)
            vc.append(np.var(out_c[sl, sl]))
            vf.append(np.var(out_f[sl, sl]))
        theory = sigma**2 / max(t, params.t0) ** 2
        rows.append((t, float(np.mean(vc)), float(np.mean(vf)), theory))
    out = args.output or "noise_analysis.csv"
    with open(out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t", "var_classic", "var_fused", "theory_classic"])
        for row in rows:
            w.writerow([f"{v:.8g}" for v in row])
    print(f"wrote {out}")
    if args.figures:
        fig_dir = Path(args.figures)
        fig_dir.mkdir(parents=True, exist_ok=True)
        report.save_noise_figure(rows, sigma, fig_dir / "noise_amplification.png")
    return 0


def cmd_prepare(args) -> int:
    prepare_dataset(args.src, args.out, crop=args.crop, down=args.down, mirror=args.mirror)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hazetool",
                                description="Noise-aware single image dehazing toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("dehaze", help="remove haze from one image")
    d.add_argument("input")
    d.add_argument("-o", "--output")
    d.add_argument("--estimator", choices=["prior", "learned"], default="prior")
    d.add_argument("--model", help="trained model file for --estimator learned")
    d.add_argument("--classic", action="store_true",
                   help="plain scattering-model inversion instead of fused recovery")
    d.add_argument("--omega", type=float)
    d.add_argument("--patch-radius", dest="patch_radius", type=int)
    d.add_argument("--eta", type=float)
    d.add_argument("--t0", type=float)
    d.add_argument("--dump-t", help="write the transmission map as PNG")
    d.add_argument("--dump-gain", help="write the normalized noise gain map as PNG")
    _add_wgif_flags(d)
    _add_config_flag(d)
    d.set_defaults(func=cmd_dehaze)

    dc = sub.add_parser("decompose", help="write base and detail layers")
    dc.add_argument("input")
    dc.add_argument("-o", "--output-dir", dest="output_dir")
    _add_wgif_flags(dc)
    _add_config_flag(dc)
    dc.set_defaults(func=cmd_decompose)

    al = sub.add_parser("airlight", help="print the estimated atmospheric light")
    al.add_argument("input")
    al.add_argument("--min-block", dest="min_block", type=int)
    al.add_argument("--debug", help="write a PNG outlining the quad-tree path")
    _add_wgif_flags(al)
    _add_config_flag(al)
    al.set_defaults(func=cmd_airlight)

    sy = sub.add_parser("synthesize", help="generate a hazy/clean training set")
    sy.add_argument("--clean", required=True)
    sy.add_argument("--depth", help="depth maps by stem (16-bit PNG); random if omitted")
    sy.add_argument("--beta", type=float, help="fixed scattering coefficient")
    sy.add_argument("--airlight", type=float, help="fixed gray airlight value")
    sy.add_argument("--noise-sigma", dest="noise_sigma", type=float, default=0.0)
    sy.add_argument("--seed", type=int)
    sy.add_argument("--out", required=True)
    _add_config_flag(sy)
    sy.set_defaults(func=cmd_synthesize)

    tr = sub.add_parser("train", help="train the transmission predictor")
    tr.add_argument("--data", required=True, help="directory with hazy/ and clean/")
    tr.add_argument("--steps", type=int)
    tr.add_argument("--lr", type=float)
    tr.add_argument("--wc", dest="w_c", type=float)
    tr.add_argument("--seed", type=int)
    tr.add_argument("--out", required=True)
    tr.add_argument("--input-size", dest="input_size", type=int)
    tr.add_argument("--grid-depth", dest="grid_depth", type=int)
    tr.add_argument("--channels", default="8,16,32,64")
    tr.add_argument("--plot", help="write the loss curve as a figure")
    _add_wgif_flags(tr)
    _add_config_flag(tr)
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("evaluate", help="SSIM/PSNR over pairs, or losses for one pair")
    ev.add_argument("--pairs", help="directory with pred/ (or hazy/) and clean/")
    ev.add_argument("--loss", nargs=2, metavar=("PRED", "TRUTH"),
                    help="print L_r, L_c and L for one image pair")
    ev.add_argument("-o", "--output", help="CSV path (default metrics.csv)")
    ev.add_argument("--figures", help="directory for rendered figures")
    ev.add_argument("--wc", dest="w_c", type=float)
    _add_config_flag(ev)
    ev.set_defaults(func=cmd_evaluate)

    na = sub.add_parser("noise-analyze",
                        help="flat-scene noise amplification: classic vs fused recovery")
    na.add_argument("--sigma", type=float, default=0.02)
    na.add_argument("--t", default="0.05,0.1,0.2,0.4,0.8")
    na.add_argument("--seeds", type=int, default=20)
    na.add_argument("--noise-lambda", dest="noise_lambda", type=float, default=0.02,
                    help="WGIF regularization for the decomposition in this experiment")
    na.add_argument("-o", "--output", help="CSV path (default noise_analysis.csv)")
    na.add_argument("--figures", help="directory for rendered figures")
    na.add_argument("--eta", type=float)
    na.add_argument("--t0", type=float)
    na.add_argument("--radius", type=int)
    na.add_argument("--eps", type=float)
    _add_config_flag(na)
    na.set_defaults(func=cmd_noise_analyze)

    pr = sub.add_parser("prepare", help="center-crop, downsample and mirror a pair set")
    pr.add_argument("--src", required=True)
    pr.add_argument("--out", required=True)
    pr.add_argument("--crop", type=int, default=480)
    pr.add_argument("--down", type=int, default=256)
    pr.add_argument("--mirror", action="store_true")
    pr.set_defaults(func=cmd_prepare)

    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except (OSError, ValueError, ConfigError, RuntimeError) as exc:
        print(f"hazetool: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
