from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from ..core import ImageBuffer
from ..errors import IoFailure


def quantize(img: ImageBuffer) -> np.ndarray:
    """8-bit values, clamped first, rounding half up."""
    return np.floor(np.clip(img.pixels, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def write_png(img: ImageBuffer, path) -> Path:
    path = Path(path)
    try:
        Image.fromarray(quantize(img), mode="RGB").save(path, format="PNG")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def read_png(path) -> ImageBuffer:
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    except (OSError, ValueError) as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return ImageBuffer(arr)


def box_downsample(img: ImageBuffer, factor: int) -> ImageBuffer:
    """Average non-overlapping ``factor x factor`` blocks; dimensions must divide evenly."""
    h, w = img.height, img.width
    if factor < 1 or h % factor or w % factor:
        raise ValueError(f"{w}x{h} is not divisible by {factor}")
    px = img.pixels.reshape(h // factor, factor, w // factor, factor, 3)
    return ImageBuffer(px.mean(axis=(1, 3)))
