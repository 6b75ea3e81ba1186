"""Global atmospheric light estimation by hierarchical quad-tree search.

The search runs on the base layer: each level scores the four quadrants by
mean - stddev of their luminance and descends into the winner, so flat
bright sky beats bright-but-textured regions. Inside the final block the
airlight is the pixel closest to white.
"""

from __future__ import annotations

import numpy as np

from .image import luminance

Rect = tuple[int, int, int, int]  # top, left, height, width


def _score(gray: np.ndarray) -> float:
    return float(gray.mean() - gray.std())


def quadtree_path(gray: np.ndarray, min_block: int = 16, min_frac: float = 0.005) -> list[Rect]:
    """Blocks visited while descending, outermost first (ties: TL, TR, BL, BR)."""
    h, w = gray.shape
    area_floor = min_frac * h * w
    top, left = 0, 0
    path: list[Rect] = [(top, left, h, w)]
    while True:
        hh, hw = h // 2, w // 2
        if min(hh, hw) < max(min_block, 1) or hh * hw < area_floor:
            return path
        quads: list[Rect] = [
            (top, left, hh, hw),
            (top, left + hw, hh, w - hw),
            (top + hh, left, h - hh, hw),
            (top + hh, left + hw, h - hh, w - hw),
        ]
        scores = [_score(gray[t:t + bh, l:l + bw]) for t, l, bh, bw in quads]
        top, left, h, w = quads[int(np.argmax(scores))]
        path.append((top, left, h, w))


def estimate_airlight(base: np.ndarray, min_block: int = 16, min_frac: float = 0.005) -> np.ndarray:
    """Per-channel airlight in [0, 1]^3 estimated from the base layer."""
    if base.ndim != 3:
        raise ValueError("estimate_airlight expects a 3-channel base layer")
    gray = luminance(base)
    top, left, h, w = quadtree_path(gray, min_block, min_frac)[-1]
    block = base[top:top + h, left:left + w].reshape(-1, 3)
    dist = np.sum((block - 1.0) ** 2, axis=1)
    return block[int(np.argmin(dist))].copy()
