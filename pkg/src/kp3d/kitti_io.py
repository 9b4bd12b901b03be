"""Parsers and serializers for KITTI object labels, calibration files and
train/val split lists, plus directory-level dataset loading.

Label lines are 15 whitespace-separated fields (ground truth) or 16 (detections
carrying a trailing score). All numeric parsing is locale-independent.
"""

from __future__ import annotations

import importlib.resources
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .evaluation import Detection, GroundTruth
from .geometry import Box3D, CameraCalib

_FIELD_NAMES = [
    "type", "truncated", "occluded", "alpha",
    "bbox_left", "bbox_top", "bbox_right", "bbox_bottom",
    "height", "width", "length", "x", "y", "z", "rotation_y", "score",
]

TRAIN_SPLIT_SIZE = 3712
VAL_SPLIT_SIZE = 3769


class KittiFormatError(ValueError):
    pass


@dataclass(frozen=True)
class KittiLabel:
    """One object annotation in the KITTI label format.

    `location` is the bottom-center of the box in the camera frame; dimensions
    are (h, w, l). DontCare rows keep their -1 sentinels verbatim.
    """

    type: str
    truncated: float
    occluded: int
    alpha: float
    bbox: tuple[float, float, float, float]  # left, top, right, bottom
    dimensions: tuple[float, float, float]  # h, w, l
    location: tuple[float, float, float]  # x, y, z (bottom-center)
    rotation_y: float
    score: float | None = None

    @property
    def bbox_height(self) -> float:
        return self.bbox[3] - self.bbox[1]

    def to_box3d(self) -> Box3D:
        """Convert to a center-based Box3D; camera y points down, so the center
        sits h/2 above (smaller y than) the bottom-center location."""
        h, w, l = self.dimensions
        x, y, z = self.location
        return Box3D((x, y - h / 2, z), (h, w, l), self.rotation_y)

    def to_ground_truth(self, frame: int = 0) -> GroundTruth:
        return GroundTruth(
            box=self.to_box3d(),
            cls=self.type,
            bbox_height=self.bbox_height,
            occlusion=self.occluded,
            truncation=self.truncated,
            frame=frame,
        )

    def to_detection(self, frame: int = 0) -> Detection:
        if self.score is None:
            raise KittiFormatError("label has no score field; not a detection")
        return Detection(box=self.to_box3d(), cls=self.type, score=self.score, frame=frame)


def parse_label_line(line: str, lineno: int | None = None) -> KittiLabel:
    where = f" at line {lineno}" if lineno is not None else ""
    fields = line.split()
    if len(fields) not in (15, 16):
        raise KittiFormatError(f"expected 15 or 16 fields, got {len(fields)}{where}")
    values = [fields[0]]
    for name, raw in zip(_FIELD_NAMES[1:], fields[1:]):
        try:
            values.append(float(raw))
        except ValueError:
            raise KittiFormatError(f"non-numeric value {raw!r} for field {name!r}{where}")
    return KittiLabel(
        type=values[0],
        truncated=values[1],
        occluded=int(values[2]),
        alpha=values[3],
        bbox=(values[4], values[5], values[6], values[7]),
        dimensions=(values[8], values[9], values[10]),
        location=(values[11], values[12], values[13]),
        rotation_y=values[14],
        score=values[15] if len(values) == 16 else None,
    )


def parse_label_file(text: str) -> list[KittiLabel]:
    labels = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.strip():
            labels.append(parse_label_line(line, lineno))
    return labels


def serialize_label(label: KittiLabel) -> str:
    """Emit one label line; geometry fields use 2-decimal fixed formatting,
    score (when present) uses 6 decimals."""
    parts = [
        label.type,
        f"{label.truncated:.2f}",
        str(label.occluded),
        f"{label.alpha:.2f}",
        *(f"{v:.2f}" for v in label.bbox),
        *(f"{v:.2f}" for v in label.dimensions),
        *(f"{v:.2f}" for v in label.location),
        f"{label.rotation_y:.2f}",
    ]
    if label.score is not None:
        parts.append(f"{label.score:.6f}")
    return " ".join(parts)


def serialize_detection(det: Detection, alpha: float | None = None, bbox=None) -> str:
    """Serialize a Detection in the 16-field KITTI detection format.

    The 2D bbox is not part of the 3D pipeline; callers may supply one, else a
    zero box is written. alpha defaults to yaw - atan2(x, z).
    """
    x, cy, z = det.box.center
    h, w, l = det.box.dims
    if alpha is None:
        alpha = det.box.yaw - math.atan2(x, z)
    label = KittiLabel(
        type=det.cls,
        truncated=0.0,
        occluded=0,
        alpha=alpha,
        bbox=tuple(bbox) if bbox is not None else (0.0, 0.0, 0.0, 0.0),
        dimensions=(h, w, l),
        location=(x, cy + h / 2, z),
        rotation_y=det.box.yaw,
        score=det.score,
    )
    return serialize_label(label)


def parse_calib(text: str) -> CameraCalib:
    """Read the P2 projection matrix from a KITTI calibration file."""
    for line in text.splitlines():
        key, _, rest = line.partition(":")
        if key.strip() == "P2":
            values = rest.split()
            if len(values) != 12:
                raise KittiFormatError(f"P2 must have 12 values, got {len(values)}")
            try:
                matrix = np.array([float(v) for v in values]).reshape(3, 4)
            except ValueError:
                raise KittiFormatError("non-numeric value in P2 line")
            return CameraCalib(matrix)
    raise KittiFormatError("missing P2 line in calibration file")


def load_label_dir(path: str | Path) -> dict[int, list[KittiLabel]]:
    """Load every NNNNNN.txt label file in a directory, keyed and sorted by
    frame id."""
    path = Path(path)
    if not path.is_dir():
        raise FileNotFoundError(f"not a directory: {path}")
    frames = {}
    for f in sorted(path.glob("*.txt")):
        frames[int(f.stem)] = parse_label_file(f.read_text())
    return frames


def parse_split(text: str) -> list[int]:
    return [int(line) for line in text.splitlines() if line.strip()]


def load_train_val_split() -> tuple[list[int], list[int]]:
    """Load the bundled train/val frame-id split and validate the 3712/3769
    sizes and disjointness."""
    data = importlib.resources.files("kp3d") / "data"
    train = parse_split((data / "train.txt").read_text())
    val = parse_split((data / "val.txt").read_text())
    if len(train) != TRAIN_SPLIT_SIZE:
        raise KittiFormatError(f"train split must have {TRAIN_SPLIT_SIZE} ids, got {len(train)}")
    if len(val) != VAL_SPLIT_SIZE:
        raise KittiFormatError(f"val split must have {VAL_SPLIT_SIZE} ids, got {len(val)}")
    if set(train) & set(val):
        raise KittiFormatError("train and val splits overlap")
    return train, val
