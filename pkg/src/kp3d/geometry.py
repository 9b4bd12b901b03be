"""Oriented 3D boxes in camera coordinates, projection, box encoding/decoding,
and rotated-box IoU (bird's-eye view and full 3D).

Camera frame follows the KITTI convention: x right, y down, z forward.
Yaw is the rotation about the vertical (y) axis, stored normalized to (-pi, pi].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Decoded dimensions are clamped to this range before any IoU computation so a
# wild exp() in the dimension decode cannot produce degenerate geometry.
DIM_CLAMP_MIN = 0.1
DIM_CLAMP_MAX = 40.0

_POLY_EPS = 1e-9


def normalize_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(angle + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


@dataclass(frozen=True)
class Box3D:
    """Oriented 3D box: center (x, y, z) m, dims (h, w, l) m, yaw rad."""

    center: tuple[float, float, float]
    dims: tuple[float, float, float]
    yaw: float = 0.0

    def __post_init__(self):
        h, w, l = self.dims
        if h <= 0 or w <= 0 or l <= 0:
            raise ValueError(f"box dimensions must be positive, got {self.dims}")
        object.__setattr__(self, "yaw", normalize_angle(self.yaw))

    @property
    def volume(self) -> float:
        h, w, l = self.dims
        return h * w * l

    def bev_corners(self) -> np.ndarray:
        """4x2 corners (x, z) of the rotated rectangle in the ground plane,
        counter-clockwise. Length l runs along the heading direction."""
        cx, _, cz = self.center
        _, w, l = self.dims
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        local = np.array(
            [[l / 2, w / 2], [-l / 2, w / 2], [-l / 2, -w / 2], [l / 2, -w / 2]]
        )
        x = cx + local[:, 0] * c + local[:, 1] * s
        z = cz - local[:, 0] * s + local[:, 1] * c
        return np.stack([x, z], axis=1)

    def y_extent(self) -> tuple[float, float]:
        """Vertical span (y_min, y_max); y points down so min is the box top."""
        cy = self.center[1]
        h = self.dims[0]
        return cy - h / 2, cy + h / 2

    def translated(self, offset: tuple[float, float, float]) -> "Box3D":
        cx, cy, cz = self.center
        ox, oy, oz = offset
        return Box3D((cx + ox, cy + oy, cz + oz), self.dims, self.yaw)


@dataclass(frozen=True)
class CameraCalib:
    """Pinhole camera described by a 3x4 projection matrix (KITTI P2 semantics)."""

    projection: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.projection, dtype=float)
        if p.shape != (3, 4):
            raise ValueError(f"projection must be 3x4, got {p.shape}")
        if not np.allclose(p[2, :3], [0.0, 0.0, 1.0]):
            raise ValueError("bottom row of the intrinsic part must be (0, 0, 1)")
        if p[0, 0] <= 0 or p[1, 1] <= 0:
            raise ValueError("focal lengths must be positive")
        object.__setattr__(self, "projection", p)

    @property
    def f_u(self) -> float:
        return self.projection[0, 0]

    @property
    def f_v(self) -> float:
        return self.projection[1, 1]

    @property
    def c_u(self) -> float:
        return self.projection[0, 2]

    @property
    def c_v(self) -> float:
        return self.projection[1, 2]


@dataclass(frozen=True)
class DecodeStats:
    """Standardization constants used by the box encode/decode pair.

    Depth is standardized as z = depth_mean + dz * depth_std; dimensions are
    log-ratios against per-class mean dimensions. Defaults are the common KITTI
    car statistics; none of this is normative, only self-consistent.
    """

    depth_mean: float = 28.01
    depth_std: float = 16.32
    mean_dims: dict[str, tuple[float, float, float]] = field(
        default_factory=lambda: {"Car": (1.63, 1.53, 3.88)}
    )
    downsample: int = 4

    def __post_init__(self):
        if self.depth_std <= 0:
            raise ValueError("depth_std must be positive")
        if self.downsample < 1 or int(self.downsample) != self.downsample:
            raise ValueError("downsample must be a positive integer")
        for cls, d in self.mean_dims.items():
            if min(d) <= 0:
                raise ValueError(f"mean dims for {cls!r} must be positive")

    def dims_for(self, cls: str) -> tuple[float, float, float]:
        try:
            return self.mean_dims[cls]
        except KeyError:
            raise KeyError(f"no mean dimensions configured for class {cls!r}")


def project_to_image(point, calib: CameraCalib) -> tuple[float, float]:
    """Project a camera-frame 3D point to pixel coordinates."""
    x, y, z = point
    if z <= 0:
        raise ValueError("point behind camera")
    p = calib.projection
    hom = p @ np.array([x, y, z, 1.0])
    return hom[0] / hom[2], hom[1] / hom[2]


def backproject(u: float, v: float, z: float, calib: CameraCalib):
    """Invert project_to_image for a pixel at known camera depth z."""
    p = calib.projection
    w = z + p[2, 3]
    x = (u * w - p[0, 2] * z - p[0, 3]) / p[0, 0]
    y = (v * w - p[1, 2] * z - p[1, 3]) / p[1, 1]
    return x, y, z


def encode_box(box: Box3D, cls: str, calib: CameraCalib, stats: DecodeStats):
    """Encode a box as (keypoint on the 1/4 grid, 8-tuple of regression values).

    Tuple layout: (dz, du, dv, dh, dw, dl, sin_alpha, cos_alpha).
    """
    x, y, z = box.center
    if z <= 0:
        raise ValueError("point behind camera")
    u, v = project_to_image(box.center, calib)
    s = stats.downsample
    ku, kv = math.floor(u / s), math.floor(v / s)
    du, dv = u / s - ku, v / s - kv
    dz = (z - stats.depth_mean) / stats.depth_std
    mean = stats.dims_for(cls)
    dh, dw, dl = (math.log(d / m) for d, m in zip(box.dims, mean))
    alpha = normalize_angle(box.yaw - math.atan2(x, z))
    tau = np.array([dz, du, dv, dh, dw, dl, math.sin(alpha), math.cos(alpha)])
    return (ku, kv), tau


def decode_box(
    tau,
    keypoint: tuple[int, int],
    cls: str,
    calib: CameraCalib,
    stats: DecodeStats,
    clamp_dims: bool = False,
) -> Box3D:
    """Decode an 8-tuple of regression values at a 1/4-grid keypoint to a Box3D."""
    tau = np.asarray(tau, dtype=float)
    if tau.shape != (8,):
        raise ValueError(f"expected an 8-tuple of regression values, got shape {tau.shape}")
    dz, du, dv, dh, dw, dl, sin_a, cos_a = tau
    z = stats.depth_mean + dz * stats.depth_std
    if z <= 0:
        raise ValueError("non-positive decoded depth")
    s = stats.downsample
    u = s * (keypoint[0] + du)
    v = s * (keypoint[1] + dv)
    x, y, z = backproject(u, v, z, calib)
    mean = stats.dims_for(cls)
    dims = tuple(m * math.exp(d) for m, d in zip(mean, (dh, dw, dl)))
    if clamp_dims:
        dims = tuple(min(max(d, DIM_CLAMP_MIN), DIM_CLAMP_MAX) for d in dims)
    alpha = math.atan2(sin_a, cos_a)
    yaw = normalize_angle(alpha + math.atan2(x, z))
    return Box3D((x, y, z), dims, yaw)


def _polygon_area(poly: np.ndarray) -> float:
    """Shoelace area of a polygon given as an (n, 2) vertex array."""
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def clip_convex(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of convex polygon `subject` by convex `clip`.

    Both polygons must be counter-clockwise. Returns the (possibly empty)
    intersection polygon.
    """
    output = [tuple(p) for p in subject]
    n = len(clip)
    for i in range(n):
        if not output:
            break
        a = clip[i]
        b = clip[(i + 1) % n]
        ex, ey = b[0] - a[0], b[1] - a[1]
        inputs = output
        output = []
        sides = [ex * (p[1] - a[1]) - ey * (p[0] - a[0]) for p in inputs]
        for j, p in enumerate(inputs):
            q = inputs[(j + 1) % len(inputs)]
            sp, sq = sides[j], sides[(j + 1) % len(inputs)]
            inside_p = sp >= -_POLY_EPS
            inside_q = sq >= -_POLY_EPS
            if inside_p:
                output.append(p)
            if inside_p != inside_q:
                t = sp / (sp - sq)
                output.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return np.array(output) if output else np.empty((0, 2))


def bev_intersection_area(a: Box3D, b: Box3D) -> float:
    return _polygon_area(clip_convex(a.bev_corners(), b.bev_corners()))


def _same_box(a: Box3D, b: Box3D) -> bool:
    return a.center == b.center and a.dims == b.dims and a.yaw == b.yaw


def iou_bev(a: Box3D, b: Box3D) -> float:
    """Intersection over union of the rotated box footprints in the x-z plane."""
    area_a = a.dims[1] * a.dims[2]
    area_b = b.dims[1] * b.dims[2]
    inter = bev_intersection_area(a, b)
    union = area_a + area_b - inter
    if union <= 0:
        return 1.0 if _same_box(a, b) else 0.0
    return min(max(inter / union, 0.0), 1.0)


def iou_3d(a: Box3D, b: Box3D) -> float:
    """Volumetric IoU: BEV footprint overlap times vertical overlap."""
    a_lo, a_hi = a.y_extent()
    b_lo, b_hi = b.y_extent()
    y_overlap = max(0.0, min(a_hi, b_hi) - max(a_lo, b_lo))
    inter = bev_intersection_area(a, b) * y_overlap
    union = a.volume + b.volume - inter
    if union <= 0:
        return 1.0 if _same_box(a, b) else 0.0
    return min(max(inter / union, 0.0), 1.0)
