"""Lossless image and mask file I/O plus grid-aligned downsampling."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


def load_image(path) -> np.ndarray:
    """Load an 8-bit image as a writable (H, W) grayscale or (H, W, 3) RGB array."""
    with Image.open(path) as im:
        if im.mode in ("L", "I;16"):
            return np.array(im.convert("L"))
        return np.array(im.convert("RGB"))


def save_image(path, image: np.ndarray) -> None:
    image = np.asarray(image)
    if image.dtype != np.uint8:
        raise TypeError(f"images are written as 8-bit, got {image.dtype}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(image).save(path)


def load_mask(path) -> np.ndarray:
    """Load a mask PNG; any nonzero sample counts as set."""
    with Image.open(path) as im:
        return np.asarray(im.convert("L")) > 0


def save_mask(path, mask: np.ndarray, true_value: int = 255) -> None:
    """Write a boolean mask as an 8-bit PNG (set pixels = ``true_value``)."""
    mask = np.asarray(mask)
    if mask.dtype != np.bool_:
        raise TypeError(f"masks are boolean, got {mask.dtype}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.where(mask, np.uint8(true_value), np.uint8(0))).save(path)


def box_downsample(image: np.ndarray, factor: int) -> np.ndarray:
    """Box-filter downsample by an integer factor (dimensions must divide)."""
    if factor < 1:
        raise ValueError(f"downsample factor must be >= 1, got {factor}")
    if factor == 1:
        return image.copy()
    image = np.asarray(image)
    h, w = image.shape[:2]
    if h % factor or w % factor:
        raise ValueError(f"size {w}x{h} not divisible by downsample factor {factor}")
    squeeze = image.ndim == 2
    if squeeze:
        image = image[:, :, None]
    blocks = image.reshape(h // factor, factor, w // factor, factor, image.shape[2])
    mean = blocks.astype(np.float64).mean(axis=(1, 3))
    if image.dtype == np.uint8:
        out = np.clip(np.floor(mean + 0.5), 0, 255).astype(np.uint8)
    else:
        out = mean.astype(image.dtype)
    return out[:, :, 0] if squeeze else out


def to_uint8(image: np.ndarray) -> np.ndarray:
    """Quantize a float image in [0, 1] to 8 bits."""
    return np.clip(np.floor(np.asarray(image, dtype=np.float64) * 255.0 + 0.5), 0, 255).astype(
        np.uint8
    )
