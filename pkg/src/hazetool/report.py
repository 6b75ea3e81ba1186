"""Figure rendering for the reporting paths of the CLI.

All figures go to files (Agg backend); CSV output stays the machine-readable
record, the figures are the human-readable companion.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_metrics_figure(rows: list[tuple[str, float, float]], path: str | os.PathLike) -> None:
    """Per-image SSIM and PSNR bars from evaluate's CSV rows."""
    names = [r[0] for r in rows]
    ssims = [r[1] for r in rows]
    psnrs = [min(r[2], 99.0) for r in rows]  # cap inf sentinels for display
    x = np.arange(len(names))
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(max(6, 0.5 * len(names)), 6), sharex=True)
    ax1.bar(x, ssims, color="tab:blue")
    ax1.set_ylabel("SSIM")
    ax1.set_ylim(0, 1)
    ax2.bar(x, psnrs, color="tab:orange")
    ax2.set_ylabel("PSNR (dB)")
    ax2.set_xticks(x)
    ax2.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_noise_figure(rows: list[tuple[float, float, float, float]], sigma: float,
                      path: str | os.PathLike) -> None:
    """Flat-region output variance vs transmission for classic and fused recovery."""
    t = [r[0] for r in rows]
    var_classic = [r[1] for r in rows]
    var_fused = [r[2] for r in rows]
    theory = [r[3] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(t, var_classic, "o-", label="classic recovery")
    ax.plot(t, var_fused, "s-", label="fused recovery")
    ax.plot(t, theory, "k--", label=r"$\sigma^2 / \max(t, t_0)^2$")
    ax.axhline(sigma**2, color="gray", lw=0.8, label=r"input $\sigma^2$")
    ax.set_yscale("log")
    ax.set_xlabel("transmission t")
    ax.set_ylabel("output noise variance")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_loss_curve(trace: list[float], path: str | os.PathLike) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(trace)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
