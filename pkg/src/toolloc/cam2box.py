"""Class activation maps to scored bounding boxes.

A frame's ``C x H x W`` activation stack is reduced to per-class presence
probabilities by global average pooling and a sigmoid.  Classes above the
presence threshold are visited from most to least probable; each map is
min-max normalized, binarized (Otsu or a fixed level), split into connected
components, and every component large enough becomes a detection.  A final
greedy IoU pass drops boxes overlapping an already accepted, higher-scoring
box.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from ._backend import kernels
from .core import (
    BoundingBox,
    ConfigError,
    Detection,
    EmptyInput,
    FrameDetections,
    HeatmapStack,
    NoSeparation,
    ShapeError,
    iou,
    sigmoid,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LocalizeConfig:
    threshold_mode: Literal["otsu", "fixed"] = "otsu"
    fixed_sigma: float = 0.5
    presence_threshold: float = 0.5
    min_component_area: int = 4
    dedup_iou: float = 0.5
    connectivity: int = 8
    histogram_bins: int = 256
    # maps heatmap coordinates to frame pixels (frame_w / W, frame_h / H)
    box_scale: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if self.threshold_mode not in ("otsu", "fixed"):
            raise ConfigError(f"unknown threshold mode {self.threshold_mode!r}")
        if not 0.0 < self.presence_threshold < 1.0:
            raise ConfigError("presence_threshold must be in (0, 1)")
        if not 0.0 <= self.dedup_iou <= 1.0:
            raise ConfigError("dedup_iou must be in [0, 1]")
        if self.min_component_area < 1:
            raise ConfigError("min_component_area must be >= 1")
        if self.connectivity not in (4, 8):
            raise ConfigError("connectivity must be 4 or 8")
        if self.histogram_bins < 2:
            raise ConfigError("histogram_bins must be >= 2")


@dataclass(frozen=True)
class Component:
    label: int
    box: BoundingBox
    area: int
    pixels: np.ndarray  # (area, 2) array of (row, col)


def average_maps(maps: Sequence[HeatmapStack]) -> HeatmapStack:
    """Elementwise mean of equally shaped heatmap stacks (model ensembling)."""
    if not maps:
        raise EmptyInput("no heatmaps to average")
    shape = maps[0].shape
    for m in maps[1:]:
        if m.shape != shape:
            raise ShapeError(f"heatmap shapes differ: {shape} vs {m.shape}")
    acc = np.zeros(shape, dtype=np.float64)
    for m in maps:
        acc += m.data
    return HeatmapStack(acc / len(maps))


def otsu_threshold(values, bins: int = 256) -> float:
    """Otsu's threshold over a ``bins``-bin histogram spanning ``[min, max]``.

    The returned value is the upper edge of the last background bin; values
    strictly greater than it are foreground.  Ties go to the lowest edge.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise EmptyInput("no values to threshold")
    lo, hi = float(v.min()), float(v.max())
    if lo == hi:
        raise NoSeparation("all values are equal")
    k = kernels.otsu_scan(v, lo, hi, bins)
    if k < 0:
        raise NoSeparation("histogram has a single occupied bin")
    width = (hi - lo) / bins
    return lo + (k + 1) * width


def binarize(heatmap, t: float) -> np.ndarray:
    return np.asarray(heatmap) > t


def connected_components(mask, connectivity: int = 8) -> list[Component]:
    """Components of a boolean mask, ordered by their first pixel in raster order."""
    if connectivity not in (4, 8):
        raise ConfigError("connectivity must be 4 or 8")
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise ShapeError("mask must be 2-d")
    labels, n = kernels.label_components(mask, connectivity)
    if n == 0:
        return []
    rows, cols = np.nonzero(labels)
    lab = labels[rows, cols]
    order = np.argsort(lab, kind="stable")
    rows, cols, lab = rows[order], cols[order], lab[order]
    splits = np.flatnonzero(np.diff(lab)) + 1
    out = []
    for i, (r, c) in enumerate(zip(np.split(rows, splits), np.split(cols, splits)), start=1):
        box = BoundingBox(int(c.min()), int(r.min()), int(c.max()) + 1, int(r.max()) + 1)
        out.append(Component(i, box, int(r.size), np.stack([r, c], axis=1)))
    return out


def dedup_boxes(dets: Sequence[Detection], dedup_iou: float = 0.5) -> list[Detection]:
    """Greedy IoU suppression, highest score first.

    A candidate is kept only if its IoU with every kept box is below
    ``dedup_iou``.
    """
    if not 0.0 <= dedup_iou <= 1.0:
        raise ConfigError("dedup_iou must be in [0, 1]")
    kept: list[Detection] = []
    for d in sorted(dets, key=Detection.sort_key):
        if all(iou(d.box, k.box) < dedup_iou for k in kept):
            kept.append(d)
    return kept


def presence_probabilities(frame: np.ndarray) -> np.ndarray:
    frame = np.asarray(frame, dtype=np.float64)
    return sigmoid(frame.reshape(frame.shape[0], -1).mean(axis=1))


def _normalize(m: np.ndarray) -> np.ndarray | None:
    lo, hi = m.min(), m.max()
    if hi == lo:
        return None
    return (m - lo) / (hi - lo)


def localize_frame(
    frame: np.ndarray,
    cfg: LocalizeConfig = LocalizeConfig(),
    frame_id: int = 0,
    warnings: list[str] | None = None,
) -> FrameDetections:
    """Boxes for one ``(C, H, W)`` activation frame.

    Classes whose map cannot be thresholded (constant map, or a histogram
    with one occupied bin) yield no boxes; a message is appended to
    ``warnings`` when given.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 3:
        raise ShapeError(f"expected (C, H, W) frame, got shape {frame.shape}")
    probs = presence_probabilities(frame)
    selected = [c for c in range(frame.shape[0]) if probs[c] > cfg.presence_threshold]
    selected.sort(key=lambda c: (-probs[c], c))
    sx, sy = cfg.box_scale

    candidates: list[Detection] = []
    for c in selected:
        norm = _normalize(frame[c])
        if norm is None:
            _warn(warnings, f"frame {frame_id} class {c}: constant map, no boxes")
            continue
        if cfg.threshold_mode == "otsu":
            try:
                t = otsu_threshold(norm, cfg.histogram_bins)
            except NoSeparation as exc:
                _warn(warnings, f"frame {frame_id} class {c}: {exc}")
                continue
        else:
            t = cfg.fixed_sigma
        mask = binarize(norm, t)
        for comp in connected_components(mask, cfg.connectivity):
            if comp.area < cfg.min_component_area:
                continue
            peak = float(norm[comp.pixels[:, 0], comp.pixels[:, 1]].max())
            box = comp.box if (sx, sy) == (1.0, 1.0) else comp.box.scaled(sx, sy)
            candidates.append(Detection(box, c, float(probs[c]) * peak))
    return FrameDetections(frame_id, tuple(dedup_boxes(candidates, cfg.dedup_iou)))


def localize_stack(
    stack: HeatmapStack,
    cfg: LocalizeConfig = LocalizeConfig(),
    warnings: list[str] | None = None,
) -> list[FrameDetections]:
    return [localize_frame(stack.frame(i), cfg, i, warnings) for i in range(stack.frames)]


def _warn(warnings, msg):
    log.debug(msg)
    if warnings is not None:
        warnings.append(msg)
