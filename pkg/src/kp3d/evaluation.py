"""KITTI-protocol evaluation: difficulty stratification, greedy score-ordered
detection/ground-truth matching by rotated-box IoU, and interpolated average
precision at 11 or 40 recall points.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .geometry import Box3D


class Difficulty(enum.Enum):
    EASY = "easy"
    MODERATE = "moderate"
    HARD = "hard"
    IGNORED = "ignored"


# KITTI devkit strata: (min 2D box height px, max occlusion, max truncation)
_DIFFICULTY_LIMITS = [
    (Difficulty.EASY, 40.0, 0, 0.15),
    (Difficulty.MODERATE, 25.0, 1, 0.30),
    (Difficulty.HARD, 25.0, 2, 0.50),
]


@dataclass(frozen=True)
class Detection:
    box: Box3D
    cls: str
    score: float
    frame: int = 0

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")


@dataclass(frozen=True)
class GroundTruth:
    box: Box3D
    cls: str
    bbox_height: float = 100.0
    occlusion: int = 0
    truncation: float = 0.0
    frame: int = 0

    def __post_init__(self):
        if self.bbox_height < 0:
            raise ValueError("bbox_height must be non-negative")
        if not 0.0 <= self.truncation <= 1.0:
            raise ValueError("truncation must be in [0, 1]")


@dataclass
class FrameMatches:
    """Match outcome for one frame: per-detection scores of TPs and FPs (dets
    matched to ignored GTs are dropped), and the count of valid GTs."""

    tp_scores: list[float] = field(default_factory=list)
    fp_scores: list[float] = field(default_factory=list)
    n_gt: int = 0


def difficulty_of(gt: GroundTruth) -> Difficulty:
    """Assign the KITTI difficulty stratum from 2D box height, occlusion and
    truncation; anything below the hard limits is ignored."""
    for level, min_height, max_occ, max_trunc in _DIFFICULTY_LIMITS:
        if gt.bbox_height >= min_height and gt.occlusion <= max_occ and gt.truncation <= max_trunc:
            return level
    return Difficulty.IGNORED


def _iou_function(criterion: str):
    if criterion == "3d":
        return geometry.iou_3d
    if criterion == "bev":
        return geometry.iou_bev
    raise ValueError(f"criterion must be '3d' or 'bev', got {criterion!r}")


def match_frame(
    dets: list[Detection],
    gts: list[GroundTruth],
    criterion: str = "3d",
    threshold: float = 0.7,
    ignored: list[bool] | None = None,
) -> FrameMatches:
    """Greedy one-to-one matching for a single frame and class.

    Detections are processed in descending score (ties: lower input index
    first); each claims the highest-IoU unmatched GT with IoU >= threshold.
    GTs flagged `ignored` never count as missed, and detections whose best
    match is an ignored GT are dropped rather than counted as false positives.
    """
    iou_fn = _iou_function(criterion)
    if ignored is None:
        ignored = [False] * len(gts)
    if len(ignored) != len(gts):
        raise ValueError("ignored flags must align with gts")

    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    taken = [False] * len(gts)
    result = FrameMatches(n_gt=sum(1 for ig in ignored if not ig))
    for di in order:
        det = dets[di]
        best_j, best_iou = -1, threshold
        for j, gt in enumerate(gts):
            if taken[j] or ignored[j]:
                continue
            iou = iou_fn(det.box, gt.box)
            if iou > best_iou or (iou == best_iou and best_j < 0 and iou >= threshold):
                best_j, best_iou = j, iou
        if best_j >= 0:
            taken[best_j] = True
            result.tp_scores.append(det.score)
            continue
        # no valid match: drop silently if an ignored GT would have matched
        hit_ignored = any(
            ignored[j] and iou_fn(det.box, gt.box) >= threshold for j, gt in enumerate(gts)
        )
        if not hit_ignored:
            result.fp_scores.append(det.score)
    return result


def pr_curve(frames: list[FrameMatches]) -> list[tuple[float, float]]:
    """Exact precision/recall points, one per distinct detection score.

    Scores sweep from high to low; every distinct score is a threshold, so the
    curve is exact rather than subsampled.
    """
    n_gt = sum(f.n_gt for f in frames)
    if n_gt == 0:
        raise ValueError("empty stratum")
    scored = [(s, True) for f in frames for s in f.tp_scores]
    scored += [(s, False) for f in frames for s in f.fp_scores]
    if not scored:
        return []
    scored.sort(key=lambda x: -x[0])
    points = []
    tp = fp = 0
    for i, (score, is_tp) in enumerate(scored):
        if is_tp:
            tp += 1
        else:
            fp += 1
        if i + 1 < len(scored) and scored[i + 1][0] == score:
            continue  # emit one point per distinct score threshold
        points.append((tp / n_gt, tp / (tp + fp)))
    return points


def average_precision(frames: list[FrameMatches], mode: str = "r11") -> float:
    """Interpolated AP in percent: p(r) = max precision at recall >= r,
    averaged over 11 recall points including 0 (r11) or 40 excluding 0 (r40)."""
    points = pr_curve(frames)
    if mode == "r11":
        recalls = np.linspace(0.0, 1.0, 11)
    elif mode == "r40":
        recalls = np.arange(1, 41) / 40.0
    else:
        raise ValueError(f"mode must be 'r11' or 'r40', got {mode!r}")
    total = 0.0
    for r in recalls:
        total += max((p for rec, p in points if rec >= r - 1e-12), default=0.0)
    return 100.0 * total / len(recalls)


def evaluate(
    det_frames: dict[int, list[Detection]],
    gt_frames: dict[int, list[GroundTruth]],
    cls: str = "Car",
    difficulty: Difficulty = Difficulty.MODERATE,
    criterion: str = "3d",
    threshold: float = 0.7,
    mode: str = "r11",
) -> dict:
    """Full evaluation over frames; returns the report as a plain dict."""
    level_rank = {Difficulty.EASY: 0, Difficulty.MODERATE: 1, Difficulty.HARD: 2}
    if difficulty is Difficulty.IGNORED:
        raise ValueError("cannot evaluate the ignored stratum")
    frames = []
    for frame_id in sorted(gt_frames):
        gts = [g for g in gt_frames[frame_id] if g.cls == cls]
        dets = [d for d in det_frames.get(frame_id, []) if d.cls == cls]
        ignored = [
            difficulty_of(g) is Difficulty.IGNORED
            or level_rank[difficulty_of(g)] > level_rank[difficulty]
            for g in gts
        ]
        frames.append(match_frame(dets, gts, criterion, threshold, ignored))
    ap = average_precision(frames, mode)
    return {
        "class": cls,
        "difficulty": difficulty.value,
        "criterion": criterion,
        "iou_threshold": threshold,
        "mode": mode,
        "ap": ap,
        "pr_curve": [list(p) for p in pr_curve(frames)],
    }
