"""Keypoint heatmaps: Gaussian ground-truth splatting and top-K extraction.

Heatmaps are (C, H, W) float arrays on the quarter-resolution grid, values in
[0, 1]. Pixel indices are (u, v) = (column, row).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class HeatmapShape:
    height: int
    width: int
    classes: int

    def __post_init__(self):
        if self.height < 1 or self.width < 1 or self.classes < 1:
            raise ValueError("heatmap shape fields must be positive")


@dataclass(frozen=True)
class GaussianSpec:
    """One splat: integer center (u, v) on the grid, stddev in pixels, class id."""

    center: tuple[int, int]
    sigma: float
    cls: int

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class Keypoint:
    cls: int
    u: int
    v: int
    score: float


def gaussian_radius(box_height: float, box_width: float, min_overlap: float = 0.7) -> float:
    """Splat radius guaranteeing at least `min_overlap` IoU between a box and
    any box whose corners are shifted by the radius: the minimum over the
    three corner-displacement quadratics."""
    if box_height <= 0 or box_width <= 0:
        raise ValueError("box size must be positive")
    if not 0 < min_overlap < 1:
        raise ValueError("min_overlap must be in (0, 1)")
    h, w = box_height, box_width

    a1 = 1.0
    b1 = h + w
    c1 = w * h * (1 - min_overlap) / (1 + min_overlap)
    r1 = (b1 - math.sqrt(b1 * b1 - 4 * a1 * c1)) / (2 * a1)

    a2 = 4.0
    b2 = 2 * (h + w)
    c2 = (1 - min_overlap) * w * h
    r2 = (b2 - math.sqrt(b2 * b2 - 4 * a2 * c2)) / (2 * a2)

    a3 = 4.0 * min_overlap
    b3 = -2.0 * min_overlap * (h + w)
    c3 = (min_overlap - 1) * w * h
    r3 = (b3 + math.sqrt(b3 * b3 - 4 * a3 * c3)) / (2 * a3)

    return min(r1, r2, r3)


def sigma_from_radius(radius: float) -> float:
    return (2 * math.floor(radius) + 1) / 6.0


def encode_heatmap(keypoints: list[GaussianSpec], shape: HeatmapShape) -> np.ndarray:
    """Build the ground-truth heatmap: per class channel, the element-wise max
    over all Gaussians of that class. Exactly 1 at every keypoint center."""
    out = np.zeros((shape.classes, shape.height, shape.width))
    ys = np.arange(shape.height)[:, None]
    xs = np.arange(shape.width)[None, :]
    for kp in keypoints:
        u, v = kp.center
        if not (0 <= u < shape.width and 0 <= v < shape.height):
            raise ValueError(f"keypoint {kp.center} outside {shape.width}x{shape.height} grid")
        if not 0 <= kp.cls < shape.classes:
            raise ValueError(f"class {kp.cls} out of range")
        g = np.exp(-((xs - u) ** 2 + (ys - v) ** 2) / (2.0 * kp.sigma**2))
        np.maximum(out[kp.cls], g, out=out[kp.cls])
    return out


def _local_maxima(channel: np.ndarray) -> np.ndarray:
    """Boolean mask of pixels that are >= all 8 neighbors (edges padded with -inf)."""
    padded = np.pad(channel, 1, constant_values=-np.inf)
    neighborhood = np.full_like(channel, -np.inf)
    for dv in (0, 1, 2):
        for du in (0, 1, 2):
            if dv == 1 and du == 1:
                continue
            shifted = padded[dv : dv + channel.shape[0], du : du + channel.shape[1]]
            np.maximum(neighborhood, shifted, out=neighborhood)
    return channel >= neighborhood


def topk(heatmap: np.ndarray, k: int) -> list[Keypoint]:
    """Top-K scoring 3x3 local maxima across all channels, descending score.

    Ties break on the lower flat index c*H*W + v*W + u for determinism. Returns
    fewer than K entries when fewer local maxima exist.
    """
    if k < 1:
        return []
    c, h, w = heatmap.shape
    mask = np.stack([_local_maxima(heatmap[i]) for i in range(c)])
    flat_idx = np.flatnonzero(mask.ravel())
    scores = heatmap.ravel()[flat_idx]
    # stable sort on (-score, flat index)
    order = np.lexsort((flat_idx, -scores))[:k]
    result = []
    for i in order:
        fi = flat_idx[i]
        cls, rem = divmod(int(fi), h * w)
        v, u = divmod(rem, w)
        result.append(Keypoint(cls=cls, u=u, v=v, score=float(scores[i])))
    return result


def sample_scores(heatmap: np.ndarray, indices: list[tuple[int, int, int]]) -> np.ndarray:
    """Heatmap values at (class, u, v) positions, order preserved."""
    c, h, w = heatmap.shape
    out = np.empty(len(indices))
    for i, (cls, u, v) in enumerate(indices):
        if not (0 <= cls < c and 0 <= u < w and 0 <= v < h):
            raise IndexError(f"index (class={cls}, u={u}, v={v}) out of bounds")
        out[i] = heatmap[cls, v, u]
    return out
