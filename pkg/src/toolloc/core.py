"""Domain types, box geometry and small numeric primitives."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class ToolLocError(Exception):
    """Base class for every error raised by this package."""


class EmptyInput(ToolLocError):
    pass


class ShapeError(ToolLocError):
    pass


class NoSeparation(ToolLocError):
    """Raised when a value set cannot be split into two classes."""


class DegenerateClass(ToolLocError):
    pass


class NumericalError(ToolLocError):
    pass


class OrderError(ToolLocError):
    pass


class ConfigError(ToolLocError):
    pass


class FormatError(ToolLocError):
    """Malformed file or serialized payload."""


class EmptyGroundTruth(ToolLocError):
    pass


@dataclass(frozen=True, order=True)
class BoundingBox:
    """Axis-aligned box in pixels, half-open: ``[x_min, x_max) x [y_min, y_max)``."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(c) for c in coords):
            raise ShapeError(f"non-finite box coordinates {coords}")
        if self.x_min < 0 or self.y_min < 0:
            raise ShapeError(f"negative box coordinates {coords}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ShapeError(f"empty box {coords}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.x_min, self.y_min, self.x_max, self.y_max

    def to_cxcywh(self) -> tuple[float, float, float, float]:
        return (
            (self.x_min + self.x_max) / 2.0,
            (self.y_min + self.y_max) / 2.0,
            self.width,
            self.height,
        )

    @classmethod
    def from_cxcywh(cls, cx: float, cy: float, w: float, h: float) -> "BoundingBox":
        """Build a box from center/size, clipping the top-left corner at 0."""
        x0, y0 = max(cx - w / 2.0, 0.0), max(cy - h / 2.0, 0.0)
        x1, y1 = cx + w / 2.0, cy + h / 2.0
        # keep a sliver of area when a box drifts entirely past the origin
        x1 = max(x1, x0 + 1e-6)
        y1 = max(y1, y0 + 1e-6)
        return cls(x0, y0, x1, y1)

    def scaled(self, sx: float, sy: float) -> "BoundingBox":
        return BoundingBox(self.x_min * sx, self.y_min * sy, self.x_max * sx, self.y_max * sy)


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    class_id: int
    score: float
    from_track: bool = False

    def __post_init__(self):
        if self.class_id < 0:
            raise ShapeError(f"negative class id {self.class_id}")
        if not 0.0 <= self.score <= 1.0:
            raise ShapeError(f"score {self.score} outside [0, 1]")

    def sort_key(self):
        """Descending score, then lower class id, then box coordinates."""
        return (-self.score, self.class_id, self.box.as_tuple())


@dataclass(frozen=True)
class FrameDetections:
    frame_id: int
    detections: tuple[Detection, ...] = ()

    def __post_init__(self):
        if self.frame_id < 0:
            raise ShapeError(f"negative frame id {self.frame_id}")
        object.__setattr__(self, "detections", tuple(self.detections))

    def of_class(self, class_id: int) -> list[Detection]:
        return [d for d in self.detections if d.class_id == class_id]


@dataclass(frozen=True)
class HeatmapStack:
    """Per-frame class activation maps, array shape ``(frames, classes, height, width)``."""

    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.array(self.data, copy=True)
        if data.ndim != 4:
            raise ShapeError(f"expected a 4-d (F, C, H, W) array, got shape {data.shape}")
        if min(data.shape) < 1:
            raise ShapeError(f"every dimension must be >= 1, got {data.shape}")
        if not np.issubdtype(data.dtype, np.floating):
            data = data.astype(np.float64)
        if not np.all(np.isfinite(data)):
            raise ShapeError("heatmap contains NaN or Inf")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def classes(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[2]

    @property
    def width(self) -> int:
        return self.data.shape[3]

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.data.shape

    def frame(self, i: int) -> np.ndarray:
        return self.data[i]


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes; 0 for disjoint boxes."""
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    return inter / union


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between ``(n, 4)`` and ``(m, 4)`` corner arrays."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    return np.where(inter > 0, inter / np.where(union > 0, union, 1.0), 0.0)


def boxes_array(boxes: Sequence[BoundingBox]) -> np.ndarray:
    if not boxes:
        return np.zeros((0, 4))
    return np.array([b.as_tuple() for b in boxes], dtype=np.float64)


def sigmoid(x):
    """Logistic function, stable for large ``|x|``; accepts scalars or arrays."""
    arr = np.asarray(x, dtype=np.float64)
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    e = np.exp(arr[~pos])
    out[~pos] = e / (1.0 + e)
    if out.ndim == 0:
        return float(out)
    return out


def logit(p):
    p = np.asarray(p, dtype=np.float64)
    out = np.log(p) - np.log1p(-p)
    return float(out) if out.ndim == 0 else out


def is_blank_frame(frame, epsilon: float = 1.0 / 255.0) -> bool:
    """True when every pixel of a grayscale frame (0..1 scale) is below ``epsilon``."""
    arr = np.asarray(frame, dtype=np.float64)
    if arr.size == 0:
        raise EmptyInput("empty frame")
    if epsilon < 0:
        raise ConfigError("epsilon must be >= 0")
    return bool(arr.max() < epsilon)
