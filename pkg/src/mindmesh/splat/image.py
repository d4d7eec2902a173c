"""PNG and raw ``.img`` image files."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import DataError

_MAGIC = b"IMGF"


def write_img(path, image: np.ndarray) -> None:
    """Lossless float32 image: magic, u32 H, W, C, then little-endian data."""
    a = np.asarray(image, dtype="<f4")
    if a.ndim == 2:
        a = a[..., None]
    h, w, c = a.shape
    Path(path).write_bytes(_MAGIC + struct.pack("<III", h, w, c) + a.tobytes())


def read_img(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != _MAGIC or len(raw) < 16:
        raise DataError(f"{path}: not an IMGF image")
    h, w, c = struct.unpack("<III", raw[4:16])
    if len(raw) != 16 + 4 * h * w * c:
        raise DataError(f"{path}: truncated IMGF payload")
    return np.frombuffer(raw, dtype="<f4", offset=16).reshape(h, w, c).astype(np.float32)


def write_png(path, image: np.ndarray) -> None:
    """8-bit sRGB PNG of an ``[0, 1]`` image (values are clipped)."""
    a = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    Image.fromarray(np.round(a * 255).astype(np.uint8)).save(path, format="PNG")


def read_png(path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from exc
