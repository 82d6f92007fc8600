"""Perspective warping of texture patches and Gaussian-feathered compositing.

Pixel ``(col, row)`` covers the unit square whose center is
``(col + 0.5, row + 0.5)``; all polygon and homography coordinates use this
continuous frame. Rasters are ``(H, W, 3)`` uint8 arrays, masks ``(H, W)``
float arrays in ``[0, 1]``.

Most functions accept an ``origin`` so that masks and warped patches can be
cropped to a polygon's bounding box and placed back into the full frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.ndimage import convolve1d

from .errors import DimensionMismatchError, SingularHomographyError
from .segmentation import signed_area


@dataclass(frozen=True)
class Homography:
    """3x3 projective map normalized to ``matrix[2, 2] == 1``."""

    matrix: np.ndarray

    def apply(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        h = p @ self.matrix[:, :2].T + self.matrix[:, 2]
        return h[:, :2] / h[:, 2:3]

    def inverse(self) -> Homography:
        inv = np.linalg.inv(self.matrix)
        return Homography(inv / inv[2, 2])


def _collinear(quad: np.ndarray) -> bool:
    scale = max(1.0, float(np.ptp(quad, axis=0).max())) ** 2
    for skip in range(4):
        a, b, c = np.delete(quad, skip, axis=0)
        cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if abs(cross) <= 1e-9 * scale:
            return True
    return False


def _normalizer(pts: np.ndarray) -> np.ndarray:
    center = pts.mean(axis=0)
    spread = np.sqrt(((pts - center) ** 2).sum(axis=1)).mean()
    s = math.sqrt(2) / spread
    return np.array([[s, 0, -s * center[0]], [0, s, -s * center[1]], [0, 0, 1.0]])


def solve_homography(texture_quad, contour_quad) -> Homography:
    """Map taking each contour vertex onto the texture vertex with the same index.

    Both quads are conditioned (centered, mean distance sqrt(2)) before the
    8x8 linear system with ``h22 = 1`` is solved, then the normalization is
    undone.

    Raises:
        SingularHomographyError: three vertices of either quad are collinear.
    """
    dst = np.asarray(texture_quad, dtype=float).reshape(4, 2)
    src = np.asarray(contour_quad, dtype=float).reshape(4, 2)
    if _collinear(src) or _collinear(dst):
        raise SingularHomographyError("quad has three collinear vertices")
    ts, td = _normalizer(src), _normalizer(dst)
    s = src @ ts[:2, :2].T + ts[:2, 2]
    d = dst @ td[:2, :2].T + td[:2, 2]
    a = np.zeros((8, 8))
    rhs = np.zeros(8)
    for k, ((x, y), (u, v)) in enumerate(zip(s, d)):
        a[2 * k] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
        a[2 * k + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
        rhs[2 * k], rhs[2 * k + 1] = u, v
    try:
        h = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError:
        raise SingularHomographyError("correspondence system is singular") from None
    hn = np.append(h, 1.0).reshape(3, 3)
    m = np.linalg.inv(td) @ hn @ ts
    if abs(m[2, 2]) < 1e-15 or abs(np.linalg.det(m / m[2, 2])) <= 1e-12:
        raise SingularHomographyError("homography is not invertible")
    return Homography(m / m[2, 2])


def rasterize_quad_mask(polygon, width: int, height: int, origin=(0, 0)) -> np.ndarray:
    """1 where the pixel center lies inside ``polygon`` (even-odd rule).

    ``origin`` is the global position of the mask's top-left pixel, so a
    crop of a larger frame can be rasterized directly.
    """
    poly = np.asarray(polygon, dtype=float).reshape(-1, 2)
    mask = np.zeros((height, width), dtype=float)
    if len(poly) < 3 or signed_area(poly) == 0 or width < 1 or height < 1:
        return mask
    ox, oy = origin
    yc = np.arange(height) + 0.5 + oy
    xc = np.arange(width) + 0.5 + ox
    p0, p1 = poly, np.roll(poly, -1, axis=0)
    parity = np.zeros((height, width), dtype=bool)
    for (x0, y0), (x1, y1) in zip(p0, p1):
        if y0 == y1:
            continue
        lo, hi = min(y0, y1), max(y0, y1)
        rows = np.flatnonzero((yc >= lo) & (yc < hi))
        if rows.size == 0:
            continue
        t = (yc[rows] - y0) / (y1 - y0)
        cross = x0 + t * (x1 - x0)
        parity[rows] ^= cross[:, None] < xc[None, :]
    mask[parity] = 1.0
    return mask


def polygon_crop(polygon, width: int, height: int, pad: int = 0):
    """Integer bounding box ``(x0, y0, w, h)`` of a polygon, padded and clipped."""
    poly = np.asarray(polygon, dtype=float).reshape(-1, 2)
    x0 = max(0, int(math.floor(poly[:, 0].min())) - pad)
    y0 = max(0, int(math.floor(poly[:, 1].min())) - pad)
    x1 = min(width, int(math.ceil(poly[:, 0].max())) + pad)
    y1 = min(height, int(math.ceil(poly[:, 1].max())) + pad)
    return x0, y0, max(0, x1 - x0), max(0, y1 - y0)


def bilinear_sample(texture: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample at continuous pixel-index coordinates, clamping at the borders."""
    h, w = texture.shape[:2]
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0)[:, None]
    fy = (ys - y0)[:, None]
    tex = texture.astype(float)
    top = tex[y0, x0] * (1 - fx) + tex[y0, x1] * fx
    bottom = tex[y1, x0] * (1 - fx) + tex[y1, x1] * fx
    return top * (1 - fy) + bottom * fy


def warp_texture(
    texture: np.ndarray,
    m: Homography,
    target_mask: np.ndarray,
    dest_size: tuple[int, int] | None = None,
    origin=(0, 0),
) -> np.ndarray:
    """Fill the mask's support by sampling ``texture`` at ``m`` of each pixel center.

    ``m`` maps destination coordinates to texture coordinates, so every
    destination pixel is looked up once (inverse mapping, no holes).
    Pixels outside the mask stay black.
    """
    h, w = target_mask.shape
    if dest_size is not None and tuple(dest_size) != (w, h):
        raise DimensionMismatchError(f"dest_size {dest_size} does not match mask {w}x{h}")
    out = np.zeros((h, w, 3), dtype=np.uint8)
    rows, cols = np.nonzero(target_mask > 0)
    if rows.size == 0:
        return out
    centers = np.column_stack([cols + 0.5 + origin[0], rows + 0.5 + origin[1]])
    tex_xy = m.apply(centers) - 0.5
    values = bilinear_sample(texture, tex_xy[:, 0], tex_xy[:, 1])
    out[rows, cols] = np.clip(np.rint(values), 0, 255).astype(np.uint8)
    return out


def gaussian_kernel(sigma: float) -> np.ndarray:
    radius = int(math.ceil(3 * sigma))
    x = np.arange(-radius, radius + 1, dtype=float)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_alpha(mask: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with replicated borders; ``sigma == 0`` is a no-op."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return mask.copy()
    k = gaussian_kernel(sigma)
    out = convolve1d(mask.astype(float), k, axis=0, mode="nearest")
    out = convolve1d(out, k, axis=1, mode="nearest")
    return np.clip(out, 0.0, 1.0)


def feathered_alpha(mask: np.ndarray, sigma: float) -> np.ndarray:
    """Blurred mask restricted to the mask's own support.

    Feathering only inward keeps every pixel outside the polygon untouched.
    """
    return gaussian_alpha(mask, sigma) * (mask > 0)


class Layer(NamedTuple):
    warped: np.ndarray
    alpha: np.ndarray
    origin: tuple[int, int] = (0, 0)


def compose(source: np.ndarray, layers: Sequence) -> np.ndarray:
    """Blend layers over ``source`` in order: ``out = a*warped + (1-a)*out``.

    Each layer is ``(warped, alpha)`` covering the full frame or
    ``(warped, alpha, (x0, y0))`` for a crop. Accumulation happens in float
    and is rounded once, so pixels no layer touches come back bit-exact.
    """
    out = source.astype(float)
    height, width = source.shape[:2]
    for layer in layers:
        layer = Layer(*layer)
        lh, lw = layer.alpha.shape
        x0, y0 = layer.origin
        if layer.warped.shape[:2] != (lh, lw):
            raise DimensionMismatchError("warped raster and alpha differ in size")
        if x0 < 0 or y0 < 0 or x0 + lw > width or y0 + lh > height:
            raise DimensionMismatchError(
                f"layer {lw}x{lh} at {layer.origin} does not fit in {width}x{height}"
            )
        region = out[y0 : y0 + lh, x0 : x0 + lw]
        a = layer.alpha[:, :, None]
        touched = layer.alpha > 0
        blended = a * layer.warped + (1.0 - a) * region
        region[touched] = blended[touched]
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)
