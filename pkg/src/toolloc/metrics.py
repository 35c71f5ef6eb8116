"""Presence F1 and detection AP/mAP.

AP follows the all-point interpolated convention: predictions of one class
are ranked by score across all frames, each is greedily matched to the
best-overlapping unmatched ground-truth box of its frame (IoU >= threshold),
and AP is the area under the monotone precision envelope.  Numbers are
comparable between runs of this package, not with any external leaderboard.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._backend import kernels
from .core import BoundingBox, ConfigError, Detection, EmptyGroundTruth, FrameDetections, ShapeError


@dataclass(frozen=True)
class EvalConfig:
    iou_match: float = 0.5
    include_track_boxes: bool = True

    def __post_init__(self):
        if not 0.0 < self.iou_match <= 1.0:
            raise ConfigError("iou_match must be in (0, 1]")


@dataclass
class EvalReport:
    """Per-class values are ``None`` where a metric is undefined for that class."""

    per_class_f1: list[float | None]
    mean_f1: float
    per_class_ap: list[float | None]
    mean_ap: float
    counts: list[dict[str, int]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "per_class_f1": self.per_class_f1,
            "mean_f1": self.mean_f1,
            "per_class_ap": self.per_class_ap,
            "mean_ap": self.mean_ap,
            "counts": self.counts,
        }

    def table(self, names: Sequence[str] | None = None) -> str:
        k = len(self.per_class_ap)
        names = list(names) if names else [f"class_{c}" for c in range(k)]
        width = max([len(n) for n in names] + [5])
        fmt = lambda v: "   -  " if v is None else f"{v:6.4f}"  # noqa: E731
        lines = [f"{'class':<{width}}  {'F1':>6}  {'AP':>6}  {'TP':>5}  {'FP':>5}  {'FN':>5}"]
        for c in range(k):
            cnt = self.counts[c] if c < len(self.counts) else {"tp": 0, "fp": 0, "fn": 0}
            lines.append(
                f"{names[c]:<{width}}  {fmt(self.per_class_f1[c])}  {fmt(self.per_class_ap[c])}"
                f"  {cnt['tp']:>5}  {cnt['fp']:>5}  {cnt['fn']:>5}"
            )
        lines.append(f"{'mean':<{width}}  {self.mean_f1:6.4f}  {self.mean_ap:6.4f}")
        return "\n".join(lines)


def multilabel_f1(pred, truth) -> tuple[list[float | None], float]:
    """Per-class F1 over samples and its macro mean.

    A class with no true and no predicted positives is undefined (``None``)
    and left out of the mean; if every class is undefined the mean is 1.0.
    """
    p = np.asarray(pred).astype(bool)
    t = np.asarray(truth).astype(bool)
    if p.shape != t.shape or p.ndim != 2:
        raise ShapeError(f"prediction/truth shapes differ or are not 2-d: {p.shape} vs {t.shape}")
    tp = np.sum(p & t, axis=0)
    fp = np.sum(p & ~t, axis=0)
    fn = np.sum(~p & t, axis=0)
    per: list[float | None] = []
    for c in range(p.shape[1]):
        denom = 2 * tp[c] + fp[c] + fn[c]
        per.append(None if denom == 0 else float(2 * tp[c] / denom))
    defined = [v for v in per if v is not None]
    return per, float(np.mean(defined)) if defined else 1.0


def _envelope_area(tp_flags: np.ndarray, n_gt: int) -> float:
    if tp_flags.size == 0:
        return 0.0
    tp = np.cumsum(tp_flags)
    precision = tp / np.arange(1, tp_flags.size + 1)
    recall = tp / n_gt
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    steps = np.diff(np.concatenate([[0.0], recall]))
    return float(np.sum(steps * envelope))


def _ranked(preds: Sequence[tuple[int, Detection]]):
    return sorted(preds, key=lambda fd: (-fd[1].score, fd[0], fd[1].box.as_tuple()))


def match_class(
    preds: Sequence[tuple[int, Detection]],
    gts: Sequence[tuple[int, BoundingBox]],
    iou_match: float = 0.5,
) -> np.ndarray:
    """True-positive flag for each prediction, in ranked order."""
    ranked = _ranked(preds)
    if not ranked:
        return np.zeros(0, dtype=bool)
    pb = np.array([d.box.as_tuple() for _, d in ranked], dtype=np.float64)
    pf = np.array([f for f, _ in ranked], dtype=np.int64)
    gb = np.array([b.as_tuple() for _, b in gts], dtype=np.float64).reshape(-1, 4)
    gf = np.array([f for f, _ in gts], dtype=np.int64)
    return kernels.greedy_match(pb, pf, gb, gf, iou_match) >= 0


def average_precision(
    preds: Sequence[tuple[int, Detection]],
    gts: Sequence[tuple[int, BoundingBox]],
    iou_match: float = 0.5,
) -> float | None:
    """AP of one class from ``(frame_id, detection)`` and ``(frame_id, box)`` pairs.

    Returns ``None`` when the class has no ground truth.
    """
    if not gts:
        return None
    return _envelope_area(match_class(preds, gts, iou_match).astype(np.float64), len(gts))


def _n_classes(*frame_lists: Sequence[FrameDetections]) -> int:
    k = 0
    for frames in frame_lists:
        for f in frames:
            for d in f.detections:
                k = max(k, d.class_id + 1)
    return k


def mean_ap(
    pred: Sequence[FrameDetections],
    gt: Sequence[FrameDetections],
    cfg: EvalConfig = EvalConfig(),
    num_classes: int | None = None,
) -> EvalReport:
    """Detection AP per class plus frame-level presence F1.

    A class is present in a frame when the frame holds at least one box of
    that class.  Frames absent from either list count as empty.
    """
    k = num_classes if num_classes is not None else _n_classes(pred, gt)
    gt_items: list[list[tuple[int, BoundingBox]]] = [[] for _ in range(k)]
    pred_items: list[list[tuple[int, Detection]]] = [[] for _ in range(k)]
    for f in gt:
        for d in f.detections:
            gt_items[d.class_id].append((f.frame_id, d.box))
    for f in pred:
        for d in f.detections:
            if d.from_track and not cfg.include_track_boxes:
                continue
            pred_items[d.class_id].append((f.frame_id, d))
    if not any(gt_items):
        raise EmptyGroundTruth("no ground-truth boxes in any frame")

    per_ap: list[float | None] = []
    counts = []
    for c in range(k):
        flags = match_class(pred_items[c], gt_items[c], cfg.iou_match)
        tp = int(flags.sum())
        counts.append({"tp": tp, "fp": int(flags.size - tp), "fn": len(gt_items[c]) - tp})
        per_ap.append(
            _envelope_area(flags.astype(np.float64), len(gt_items[c])) if gt_items[c] else None
        )
    defined = [a for a in per_ap if a is not None]

    frame_ids = sorted({f.frame_id for f in pred} | {f.frame_id for f in gt})
    row = {fid: i for i, fid in enumerate(frame_ids)}
    p_mat = np.zeros((len(frame_ids), k), dtype=bool)
    t_mat = np.zeros((len(frame_ids), k), dtype=bool)
    for c in range(k):
        for fid, _ in pred_items[c]:
            p_mat[row[fid], c] = True
        for fid, _ in gt_items[c]:
            t_mat[row[fid], c] = True
    per_f1, mean_f1 = multilabel_f1(p_mat, t_mat)
    return EvalReport(per_f1, mean_f1, per_ap, float(np.mean(defined)), counts)
