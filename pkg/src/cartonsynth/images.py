"""PNG input/output for 8-bit RGB rasters and grayscale debug masks."""

from __future__ import annotations

import io
from functools import lru_cache
from pathlib import Path

import numpy as np
from PIL import Image


def read_rgb(path) -> np.ndarray:
    """``(H, W, 3)`` uint8 array; cached and read-only."""
    return _read_rgb_cached(str(Path(path).resolve()))


@lru_cache(maxsize=512)
def _read_rgb_cached(path: str) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.uint8).copy()
    arr.flags.writeable = False
    return arr


def png_bytes(raster: np.ndarray, compress_level: int = 1) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(raster)).save(
        buf, format="PNG", compress_level=compress_level
    )
    return buf.getvalue()


def write_png(path, raster: np.ndarray, compress_level: int = 1) -> None:
    Path(path).write_bytes(png_bytes(raster, compress_level))


def write_mask_png(path, mask: np.ndarray) -> None:
    """Debug dump of a [0, 1] mask as 8-bit grayscale."""
    gray = np.rint(np.clip(mask, 0.0, 1.0) * 255).astype(np.uint8)
    write_png(path, gray)
