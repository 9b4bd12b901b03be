"""Synthetic scenes and an oracle feature backbone.

Stands in for a trained network at desk scale: scenes are generated
deterministically from a seed, and pyramid features are constructed so that the
planted regression head recovers every object's encoded parameters exactly when
feature noise is zero. This lets the whole encode -> gather -> regress ->
decode -> evaluate chain be exercised end to end with controllable error.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import evaluation, geometry, heatmap, litefpn
from .evaluation import Detection, GroundTruth
from .geometry import Box3D, CameraCalib, DecodeStats
from .heatmap import GaussianSpec, HeatmapShape, Keypoint
from .litefpn import FeaturePyramid, RegressionHead

R_TUPLE = 8
_MAX_RESAMPLE = 1000


def default_calib(image_size: tuple[int, int] = (384, 1280)) -> CameraCalib:
    h, w = image_size
    return CameraCalib(
        np.array([[700.0, 0.0, w / 2, 0.0], [0.0, 700.0, h / 2, 0.0], [0.0, 0.0, 1.0, 0.0]])
    )


@dataclass(frozen=True)
class SceneSpec:
    seed: int = 0
    n_objects: int = 5
    depth_range: tuple[float, float] = (8.0, 55.0)
    lateral_range: tuple[float, float] = (-18.0, 18.0)
    height_range: tuple[float, float] = (0.5, 1.8)  # center y, camera y is down
    dims_jitter: float = 0.15
    image_size: tuple[int, int] = (384, 1280)
    calib: CameraCalib = None

    def __post_init__(self):
        if self.n_objects < 0:
            raise ValueError("n_objects must be non-negative")
        for lo, hi in (self.depth_range, self.lateral_range, self.height_range):
            if hi < lo:
                raise ValueError("ranges must be non-empty")
        if self.calib is None:
            object.__setattr__(self, "calib", default_calib(self.image_size))


@dataclass(frozen=True)
class Scene:
    objects: tuple[tuple[Box3D, str], ...]
    calib: CameraCalib
    spec: SceneSpec


@dataclass(frozen=True)
class OracleModel:
    """Pyramid spec plus the planted readout head.

    Features are pseudorandom everywhere except the fine-level cell under each
    keypoint, which is solved so gather_fuse followed by `head` reproduces the
    object's encoded parameters exactly at zero feature noise. The predicted
    heatmap degrades keypoint scores with the local regression error
    (score = clamp(1 - score_a * |tau error|_1 + score_b * noise, 0, 1)).
    """

    channels: int = R_TUPLE
    head: RegressionHead = None
    stats: DecodeStats = field(default_factory=DecodeStats)
    feature_noise: float = 0.0
    score_a: float = 1.0
    score_b: float = 0.0
    head_seed: int = 7

    def __post_init__(self):
        if self.channels < R_TUPLE:
            raise ValueError(f"channels must be >= {R_TUPLE} for an exact planted head")
        if self.head is None:
            object.__setattr__(self, "head", planted_head(self.channels, seed=self.head_seed))
        if self.head.weights.shape != (3 * self.channels, R_TUPLE):
            raise ValueError("head shape inconsistent with channel count")


def planted_head(channels: int = R_TUPLE, seed: int = 7) -> RegressionHead:
    """A fixed random head whose fine-level block has full column rank, so the
    feature construction can always solve for exactness."""
    rng = np.random.default_rng(seed)
    weights = rng.normal(size=(3 * channels, R_TUPLE)) / math.sqrt(channels)
    return RegressionHead(weights=weights, bias=rng.normal(size=R_TUPLE) * 0.1)


def generate_scene(spec: SceneSpec) -> Scene:
    """Deterministically sample boxes whose projected centers land inside the
    image on distinct quarter-resolution keypoints."""
    rng = np.random.default_rng(spec.seed)
    stats = DecodeStats()
    mean = stats.dims_for("Car")
    h_img, w_img = spec.image_size
    used = set()
    objects = []
    for _ in range(spec.n_objects):
        for attempt in range(_MAX_RESAMPLE):
            z = rng.uniform(*spec.depth_range)
            x = rng.uniform(*spec.lateral_range)
            y = rng.uniform(*spec.height_range)
            dims = tuple(m * (1.0 + spec.dims_jitter * rng.uniform(-1, 1)) for m in mean)
            yaw = rng.uniform(-math.pi, math.pi)
            box = Box3D((x, y, z), dims, yaw)
            u, v = geometry.project_to_image(box.center, spec.calib)
            if not (0 <= u < w_img and 0 <= v < h_img):
                continue
            kp = (math.floor(u / 4), math.floor(v / 4))
            if kp in used:
                continue
            used.add(kp)
            objects.append((box, "Car"))
            break
        else:
            raise RuntimeError("could not place object inside the image after 1000 resamples")
    return Scene(objects=tuple(objects), calib=spec.calib, spec=spec)


def _splat_sigma(box: Box3D, calib: CameraCalib, downsample: int) -> float:
    """Gaussian stddev from the object's approximate projected size."""
    h_px = calib.f_v * box.dims[0] / box.center[2] / downsample
    w_px = calib.f_u * box.dims[1] / box.center[2] / downsample
    radius = heatmap.gaussian_radius(max(h_px, 1e-3), max(w_px, 1e-3))
    return heatmap.sigma_from_radius(max(radius, 0.0))


def encode_objects(scene: Scene, stats: DecodeStats):
    """Encode every object; on a quarter-grid keypoint collision the nearer
    object wins and a warning is recorded. Returns (keypoints, taus, boxes)."""
    by_kp = {}
    for box, cls in scene.objects:
        kp, tau = geometry.encode_box(box, cls, scene.calib, stats)
        if kp in by_kp and by_kp[kp][2].center[2] <= box.center[2]:
            warnings.warn(f"keypoint collision at {kp}; keeping nearer object")
            continue
        if kp in by_kp:
            warnings.warn(f"keypoint collision at {kp}; keeping nearer object")
        by_kp[kp] = (kp, tau, box, cls)
    entries = sorted(by_kp.values(), key=lambda e: (e[0][1], e[0][0]))
    keypoints = [e[0] for e in entries]
    taus = np.array([e[1] for e in entries]).reshape(len(entries), R_TUPLE)
    boxes = [(e[2], e[3]) for e in entries]
    return keypoints, taus, boxes


def heatmap_shape(spec: SceneSpec, classes: int = 1) -> HeatmapShape:
    h, w = spec.image_size
    return HeatmapShape(height=h // 4, width=w // 4, classes=classes)


def oracle_pyramid(scene: Scene, model: OracleModel):
    """Build (gt heatmap, predicted heatmap, feature pyramid) for a scene.

    The pyramid is random background everywhere except that each keypoint's
    fine-level cell is solved so the planted head reads the object's exact
    encoded parameters; feature noise is then layered on top.
    """
    spec = scene.spec
    shape = heatmap_shape(spec)
    d = model.channels
    rng = np.random.default_rng(spec.seed + 0x5CE11E)
    f4 = rng.normal(size=(shape.height, shape.width, d))
    f8 = rng.normal(size=(shape.height // 2, shape.width // 2, d))
    f16 = rng.normal(size=(shape.height // 4, shape.width // 4, d))

    keypoints, taus, boxes = encode_objects(scene, model.stats)
    w4 = model.head.weights[:d]
    w8 = model.head.weights[d : 2 * d]
    w16 = model.head.weights[2 * d :]
    for kp, tau in zip(keypoints, taus):
        (u8, v8), = litefpn.map_indices([kp], 8)
        (u16, v16), = litefpn.map_indices([kp], 16)
        rhs = tau - model.head.bias - f8[v8, u8] @ w8 - f16[v16, u16] @ w16
        f4[kp[1], kp[0]], *_ = np.linalg.lstsq(w4.T, rhs, rcond=None)
    if model.feature_noise > 0:
        f4 = f4 + model.feature_noise * rng.normal(size=f4.shape)
        f8 = f8 + model.feature_noise * rng.normal(size=f8.shape)
        f16 = f16 + model.feature_noise * rng.normal(size=f16.shape)
    pyramid = FeaturePyramid(levels=(f4, f8, f16))

    specs = [
        GaussianSpec(center=kp, sigma=_splat_sigma(box, scene.calib, 4), cls=0)
        for kp, (box, _) in zip(keypoints, boxes)
    ]
    gt_hm = heatmap.encode_heatmap(specs, shape)

    pred_hm = gt_hm.copy()
    if model.feature_noise == 0 and model.score_b == 0:
        return gt_hm, pred_hm, pyramid  # nothing degrades the scores
    for kp, tau in zip(keypoints, taus):
        emb = litefpn.gather_fuse(pyramid, [Keypoint(cls=0, u=kp[0], v=kp[1], score=1.0)])
        err = float(np.abs(litefpn.regress(emb, model.head)[0] - tau).sum())
        score = 1.0 - model.score_a * err + model.score_b * rng.normal()
        pred_hm[0, kp[1], kp[0]] = min(max(score, 0.0), 1.0)
    return gt_hm, pred_hm, pyramid


def run_pipeline(
    scene: Scene,
    model: OracleModel,
    k: int = 100,
    criterion: str = "3d",
    threshold: float = 0.7,
    mode: str = "r11",
    regress_head: RegressionHead | None = None,
):
    """Full head-side pipeline on one scene: top-K keypoint proposal, sparse
    multi-scale regression, box decode, KITTI-style evaluation.

    Features are always planted for `model.head`; `regress_head` (e.g. one from
    toy_train) may replace it for the regression step. Returns (detections,
    evaluation report dict).
    """
    head = regress_head if regress_head is not None else model.head
    _, pred_hm, pyramid = oracle_pyramid(scene, model)
    candidates = heatmap.topk(pred_hm, k)
    dets = []
    if candidates:
        taus = litefpn.regress(litefpn.gather_fuse(pyramid, candidates), head)
        for kp, tau in zip(candidates, taus):
            try:
                box = geometry.decode_box(
                    tau, (kp.u, kp.v), "Car", scene.calib, model.stats, clamp_dims=True
                )
            except ValueError:
                continue  # non-positive decoded depth on a background keypoint
            dets.append(Detection(box=box, cls="Car", score=kp.score))
    gts = [GroundTruth(box=box, cls=cls) for box, cls in scene.objects]
    report = evaluation.evaluate(
        {0: dets}, {0: gts}, cls="Car",
        difficulty=evaluation.Difficulty.HARD,
        criterion=criterion, threshold=threshold, mode=mode,
    )
    return dets, report


def training_data(scenes: list[Scene], model: OracleModel):
    """Gather per-keypoint (embedding, target, gt box, keypoint, score) rows
    from every scene, in scene order."""
    embeddings, targets, boxes, kps, scores = [], [], [], [], []
    for scene in scenes:
        _, pred_hm, pyramid = oracle_pyramid(scene, model)
        keypoints, taus, kept = encode_objects(scene, model.stats)
        kp_objs = [Keypoint(cls=0, u=u, v=v, score=1.0) for u, v in keypoints]
        embeddings.append(litefpn.gather_fuse(pyramid, kp_objs))
        targets.append(taus)
        boxes.extend(b for b, _ in kept)
        kps.extend(keypoints)
        scores.extend(float(pred_hm[0, v, u]) for u, v in keypoints)
    if not embeddings:
        raise ValueError("no training keypoints")
    return (
        np.concatenate(embeddings),
        np.concatenate(targets),
        boxes,
        kps,
        np.array(scores),
    )


def toy_train(
    scenes: list[Scene],
    model: OracleModel,
    loss: str = "l1",
    epochs: int = 200,
    step: float = 1.0,
    attention_params=None,
    calib: CameraCalib | None = None,
    init: RegressionHead | None = None,
):
    """Fit a fresh regression head by full-batch subgradient descent.

    Only the linear head is trained; features stay fixed. Descent runs in an
    SVD-whitened parameterization of the embedding (a fixed linear
    preconditioner, computed once) with a Polyak-style step (loss over squared
    gradient norm, scaled by `step`); on the zero-noise interpolation problem
    this converges linearly.

    Returns (learned RegressionHead, loss trace).
    """
    from . import losses

    if loss not in ("l1", "attention"):
        raise ValueError("loss must be 'l1' or 'attention'")
    if attention_params is None:
        attention_params = losses.AttentionParams()
    emb, targets, gt_boxes, kps, scores = training_data(scenes, model)
    calib = calib if calib is not None else scenes[0].calib
    n, d3 = emb.shape
    design = np.concatenate([emb, np.ones((n, 1))], axis=1)  # bias column last
    # descend in SVD-whitened coordinates: pred = U w_white, a fixed linear
    # preconditioner that leaves the objective itself unchanged
    u_mat, sing, vt = np.linalg.svd(design, full_matrices=False)
    keep = sing > sing[0] * 1e-12
    u_mat, sing, vt = u_mat[:, keep], sing[keep], vt[keep]
    if init is not None:
        w = (sing[:, None]) * (vt @ np.concatenate([init.weights, init.bias[None, :]], axis=0))
    else:
        w = np.zeros((sing.size, R_TUPLE))
    trace = []
    for _ in range(epochs):
        pred = u_mat @ w
        if loss == "attention":
            ious = np.empty(n)
            for i in range(n):
                try:
                    box = geometry.decode_box(
                        pred[i], kps[i], "Car", calib, model.stats, clamp_dims=True
                    )
                    ious[i] = geometry.iou_3d(box, gt_boxes[i])
                except ValueError:
                    ious[i] = 0.0
            batch = losses.LossBatch(pred, targets, scores=scores, ious=ious)
            weights = losses.attention_weights(batch, attention_params)
        else:
            batch = losses.LossBatch(pred, targets)
            weights = np.ones(n)
        value, grad = losses.attention_loss(batch, weights)
        trace.append(value)
        if value > 1e6:
            raise RuntimeError("step size too large")
        gw = u_mat.T @ grad
        norm_sq = float((gw**2).sum())
        if norm_sq == 0.0:
            break  # at a planted optimum
        w -= step * value / norm_sq * gw
    full = vt.T @ (w / sing[:, None])
    return RegressionHead(weights=full[:-1], bias=full[-1]), trace
