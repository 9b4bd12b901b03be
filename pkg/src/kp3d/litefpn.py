"""Sparse multi-scale regression: map candidate keypoint indices across pyramid
levels, gather features into a K x 3D embedding, and apply a shared linear head.

Feature grids are (H, W, D) arrays; the pyramid holds three of them at strides
4, 8 and 16 relative to the input image.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .heatmap import Keypoint

STRIDES = (4, 8, 16)


@dataclass(frozen=True)
class FeaturePyramid:
    """Three feature grids at 1/4, 1/8 and 1/16 of the input resolution."""

    levels: tuple[np.ndarray, np.ndarray, np.ndarray]

    def __post_init__(self):
        f4, f8, f16 = self.levels
        if not (f4.ndim == f8.ndim == f16.ndim == 3):
            raise ValueError("each level must be an (H, W, D) array")
        d = f4.shape[2]
        if f8.shape[2] != d or f16.shape[2] != d:
            raise ValueError("all levels must share the channel count")
        if f8.shape[:2] != (f4.shape[0] // 2, f4.shape[1] // 2):
            raise ValueError("1/8 level shape must be floor(1/4 shape / 2)")
        if f16.shape[:2] != (f4.shape[0] // 4, f4.shape[1] // 4):
            raise ValueError("1/16 level shape must be floor(1/4 shape / 4)")

    @property
    def channels(self) -> int:
        return self.levels[0].shape[2]


@dataclass(frozen=True)
class RegressionHead:
    """Linear map applied per keypoint: a 1x1 convolution on K points."""

    weights: np.ndarray  # (in_features, R)
    bias: np.ndarray  # (R,)

    def __post_init__(self):
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[1],):
            raise ValueError("weights must be (in, R) with a matching R-vector bias")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias).all()):
            raise ValueError("head parameters must be finite")


def map_indices(indices, level: int):
    """Map (u, v) indices from the 1/4 grid to a coarser level by floor division.

    `level` is the stride: 4 (identity), 8 or 16.
    """
    if level not in STRIDES:
        raise ValueError(f"level stride must be one of {STRIDES}")
    factor = level // 4
    return [(u // factor, v // factor) for u, v in indices]


def gather_fuse(pyramid: FeaturePyramid, keypoints: list[Keypoint]) -> np.ndarray:
    """Concatenate per-keypoint features from the three levels, finest first.

    Returns a (K, 3D) embedding; row order follows the keypoint order.
    """
    d = pyramid.channels
    out = np.empty((len(keypoints), 3 * d))
    idx4 = [(kp.u, kp.v) for kp in keypoints]
    for li, (level, stride) in enumerate(zip(pyramid.levels, STRIDES)):
        h, w = level.shape[:2]
        for row, (u, v) in enumerate(map_indices(idx4, stride)):
            if not (0 <= u < w and 0 <= v < h):
                raise IndexError(f"mapped index ({u}, {v}) out of bounds at stride {stride}")
            out[row, li * d : (li + 1) * d] = level[v, u]
    return out


def regress(embedding: np.ndarray, head: RegressionHead) -> np.ndarray:
    """Apply the shared linear head: row i -> embedding_i @ W + b."""
    if embedding.ndim != 2 or embedding.shape[1] != head.weights.shape[0]:
        raise ValueError(
            f"embedding has {embedding.shape[1] if embedding.ndim == 2 else '?'} columns, "
            f"head expects {head.weights.shape[0]}"
        )
    return embedding @ head.weights + head.bias


def dense_regress_then_gather(
    features: np.ndarray, head: RegressionHead, keypoints: list[Keypoint]
) -> np.ndarray:
    """Baseline path: apply the head at every pixel of a single-scale (H, W, D)
    grid, then sample the keypoint pixels. Equals gather-then-regress exactly."""
    h, w, d = features.shape
    if d != head.weights.shape[0]:
        raise ValueError(f"feature channels {d} do not match head input {head.weights.shape[0]}")
    dense = features.reshape(h * w, d) @ head.weights + head.bias
    dense = dense.reshape(h, w, -1)
    out = np.empty((len(keypoints), head.weights.shape[1]))
    for row, kp in enumerate(keypoints):
        if not (0 <= kp.u < w and 0 <= kp.v < h):
            raise IndexError(f"keypoint ({kp.u}, {kp.v}) out of bounds")
        out[row] = dense[kp.v, kp.u]
    return out
