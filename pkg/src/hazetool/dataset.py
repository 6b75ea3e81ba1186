"""Paired dataset handling: hazy/clean directory layout, crop/resize/mirror."""

from __future__ import annotations

import os
import sys
from pathlib import Path

import numpy as np

from .image import load_image, resize, save_image

_EXTS = (".png", ".ppm", ".pgm")


def list_pairs(root: str | os.PathLike, a: str = "hazy", b: str = "clean") -> list[tuple[Path, Path]]:
    """Matched (hazy, clean) paths by stem, sorted; unmatched stems are skipped."""
    root = Path(root)
    da, db = root / a, root / b
    if not da.is_dir() or not db.is_dir():
        raise FileNotFoundError(f"expected {a}/ and {b}/ under {root}")
    files_a = {p.stem: p for p in sorted(da.iterdir()) if p.suffix.lower() in _EXTS}
    files_b = {p.stem: p for p in sorted(db.iterdir()) if p.suffix.lower() in _EXTS}
    pairs = []
    for stem in sorted(set(files_a) | set(files_b)):
        if stem in files_a and stem in files_b:
            pairs.append((files_a[stem], files_b[stem]))
        else:
            side = a if stem in files_a else b
            print(f"warning: {stem} present only under {side}/, skipping", file=sys.stderr)
    return pairs


def load_pairs(root: str | os.PathLike) -> list[tuple[np.ndarray, np.ndarray]]:
    return [(load_image(h), load_image(c)) for h, c in list_pairs(root)]


def center_crop(img: np.ndarray, size: int) -> np.ndarray:
    h, w = img.shape[:2]
    s = min(size, h, w)
    top = (h - s) // 2
    left = (w - s) // 2
    return img[top:top + s, left:left + s]


def prepare_dataset(
    src: str | os.PathLike,
    dst: str | os.PathLike,
    crop: int = 480,
    down: int = 256,
    mirror: bool = False,
) -> Path:
    """Center-crop, downsample and optionally mirror every pair into dst."""
    dst = Path(dst)
    for sub in ("hazy", "clean"):
        (dst / sub).mkdir(parents=True, exist_ok=True)
    for hazy_path, clean_path in list_pairs(src):
        for sub, path in (("hazy", hazy_path), ("clean", clean_path)):
            img = resize(center_crop(load_image(path), crop), down, down)
            save_image(img, dst / sub / f"{path.stem}.png")
            if mirror:
                save_image(img[:, ::-1], dst / sub / f"{path.stem}_m.png")
    return dst
