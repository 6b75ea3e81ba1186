"""Image representation, color conversion, resampling and file I/O.

Images are plain numpy arrays of float64 in [0, 1]: shape (H, W) for a
single channel, (H, W, 3) for color. All public functions return arrays
whose samples stay inside [0, 1].
"""

from __future__ import annotations

import os

import cv2
import numpy as np
from PIL import Image

# BT.601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])


class ImageFormatError(ValueError):
    """Unsupported pixel format or bit depth."""


def _check_image(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim not in (2, 3) or (img.ndim == 3 and img.shape[2] != 3):
        raise ValueError(f"expected (H, W) or (H, W, 3) array, got shape {img.shape}")
    return img


def load_image(path: str | os.PathLike) -> np.ndarray:
    """Load an 8/16-bit PNG or binary PPM/PGM as float64 in [0, 1]."""
    with Image.open(path) as im:
        mode = im.mode
        if mode in ("I;16", "I;16B", "I"):
            arr = np.asarray(im, dtype=np.float64) / 65535.0
        elif mode in ("L", "RGB"):
            arr = np.asarray(im, dtype=np.float64) / 255.0
        elif mode in ("RGBA", "LA", "P"):
            arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
        else:
            raise ImageFormatError(f"unsupported image mode {mode!r} in {path}")
    return np.clip(arr, 0.0, 1.0)


def save_image(img: np.ndarray, path: str | os.PathLike, bit_depth: int = 8) -> None:
    """Write an image as PNG or binary PPM/PGM.

    8-bit supports gray and color; 16-bit is limited to single-channel PNG
    (used for depth maps).
    """
    img = _check_image(img)
    if not (np.all(img >= 0.0) and np.all(img <= 1.0)):
        raise ValueError("samples outside [0, 1]; clip explicitly before saving")
    if bit_depth == 8:
        q = np.round(img * 255.0).astype(np.uint8)
        Image.fromarray(q).save(path)
    elif bit_depth == 16:
        if img.ndim != 2:
            raise ImageFormatError("16-bit output is single-channel only")
        q = np.round(img * 65535.0).astype(np.uint16)
        Image.fromarray(q).save(path)
    else:
        raise ImageFormatError(f"unsupported bit depth {bit_depth}")


def load_depth(path: str | os.PathLike) -> np.ndarray:
    """Load a depth map from 16-bit PNG (depth/65535) or single-channel PFM."""
    p = os.fspath(path)
    if p.lower().endswith(".pfm"):
        return _load_pfm(p)
    d = load_image(p)
    if d.ndim == 3:
        d = d.mean(axis=2)
    return d


def _load_pfm(path: str) -> np.ndarray:
    with open(path, "rb") as f:
        header = f.readline().strip()
        if header != b"Pf":
            raise ImageFormatError(f"{path}: only grayscale PFM (Pf) is supported")
        w, h = map(int, f.readline().split())
        scale = float(f.readline())
        data = np.fromfile(f, "<f4" if scale < 0 else ">f4", count=w * h)
    d = data.reshape(h, w)[::-1].astype(np.float64)  # PFM rows are bottom-up
    if not np.all(np.isfinite(d)) or np.any(d < 0):
        raise ImageFormatError(f"{path}: depth values must be finite and >= 0")
    return d


def save_pfm(depth: np.ndarray, path: str | os.PathLike) -> None:
    depth = np.asarray(depth, dtype=np.float32)
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{depth.shape[1]} {depth.shape[0]}\n".encode())
        f.write(b"-1.0\n")
        depth[::-1].astype("<f4").tofile(f)


def luminance(img: np.ndarray) -> np.ndarray:
    """BT.601 luminance of a 3-channel image."""
    img = _check_image(img)
    if img.ndim != 3:
        raise ValueError("luminance expects a 3-channel image")
    return img @ _LUMA


def resize(img: np.ndarray, new_w: int, new_h: int) -> np.ndarray:
    """Resample to (new_h, new_w): area averaging when shrinking, bilinear otherwise."""
    img = _check_image(img)
    if new_w < 1 or new_h < 1:
        raise ValueError("resize dimensions must be >= 1")
    h, w = img.shape[:2]
    interp = cv2.INTER_AREA if (new_w < w or new_h < h) else cv2.INTER_LINEAR
    out = cv2.resize(img, (new_w, new_h), interpolation=interp)
    return np.clip(out, 0.0, 1.0)
