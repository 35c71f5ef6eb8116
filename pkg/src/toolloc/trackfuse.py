"""Kalman box tracking, detection/track fusion and pseudo-label gates.

The tracker is a constant-velocity Kalman filter over box center and size,
``(cx, cy, w, h, vcx, vcy, vw, vh)``, observed through ``(cx, cy, w, h)``.
Per frame, tracks are predicted, greedily associated with detections of
the same class by IoU, and either updated (emitting a weighted blend of
detection and prediction) or coasted (emitting the prediction with a decayed
score) until they miss too many frames.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import (
    BoundingBox,
    ConfigError,
    Detection,
    FrameDetections,
    NumericalError,
    OrderError,
    iou,
)

STATE_DIM = 8
OBS_DIM = 4

MOTION = np.eye(STATE_DIM)
MOTION[:OBS_DIM, OBS_DIM:] = np.eye(OBS_DIM)
OBSERVE = np.eye(OBS_DIM, STATE_DIM)


@dataclass(frozen=True)
class FuseConfig:
    det_weight: float = 0.7
    match_iou: float = 0.3
    max_misses: int = 5
    pos_noise: float = 1.0
    size_noise: float = 0.5
    vel_noise: float = 0.1
    measurement_noise: float = 1.0
    score_decay: float = 0.9

    def __post_init__(self):
        if not 0.0 <= self.det_weight <= 1.0:
            raise ConfigError("det_weight must be in [0, 1]")
        if not 0.0 <= self.match_iou <= 1.0:
            raise ConfigError("match_iou must be in [0, 1]")
        if self.max_misses < 0:
            raise ConfigError("max_misses must be >= 0")
        if min(self.pos_noise, self.size_noise, self.vel_noise) < 0:
            raise ConfigError("process noise must be >= 0")
        if not self.measurement_noise > 0:
            raise ConfigError("measurement_noise must be > 0")

    def process_cov(self) -> np.ndarray:
        std = [self.pos_noise] * 2 + [self.size_noise] * 2 + [self.vel_noise] * 4
        return np.diag(np.square(std))

    def measurement_cov(self) -> np.ndarray:
        return np.eye(OBS_DIM) * self.measurement_noise**2


@dataclass(frozen=True)
class TrackState:
    mean: np.ndarray = field(repr=False)
    covariance: np.ndarray = field(repr=False)
    class_id: int = 0
    track_id: int = 0
    age: int = 1
    misses: int = 0
    score: float = 1.0

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.float64).reshape(STATE_DIM)
        cov = np.array(self.covariance, dtype=np.float64).reshape(STATE_DIM, STATE_DIM)
        if not (mean[2] > 0 and mean[3] > 0):
            raise NumericalError(f"track size must be positive, got w={mean[2]} h={mean[3]}")
        if not np.allclose(cov, cov.T, rtol=1e-9, atol=1e-12):
            raise NumericalError("track covariance is not symmetric")
        _check_psd(cov)
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def box(self) -> BoundingBox:
        return BoundingBox.from_cxcywh(*self.mean[:4])


def _check_psd(cov: np.ndarray) -> None:
    jitter = 1e-10 * max(1.0, float(np.abs(np.diag(cov)).max()))
    try:
        np.linalg.cholesky(cov + jitter * np.eye(cov.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise NumericalError("covariance is not positive semi-definite") from exc


def initiate(det: Detection, cfg: FuseConfig = FuseConfig(), track_id: int = 0) -> TrackState:
    """New track at a detection, with zero velocity."""
    mean = np.zeros(STATE_DIM)
    mean[:4] = det.box.to_cxcywh()
    r = cfg.measurement_noise
    vel = 10.0 * max(cfg.vel_noise, 1e-3)
    cov = np.diag([r * r] * 4 + [vel * vel] * 4)
    return TrackState(mean, cov, det.class_id, track_id, 1, 0, det.score)


def kalman_predict(state: TrackState, cfg: FuseConfig = FuseConfig()) -> TrackState:
    mean = MOTION @ state.mean
    # a shrinking box never collapses below a pixel fraction
    mean[2] = max(mean[2], 1e-3)
    mean[3] = max(mean[3], 1e-3)
    cov = MOTION @ state.covariance @ MOTION.T + cfg.process_cov()
    cov = (cov + cov.T) / 2.0
    return replace(state, mean=mean, covariance=cov, age=state.age + 1)


def kalman_update(state: TrackState, measurement: BoundingBox, cfg: FuseConfig = FuseConfig()) -> TrackState:
    """Standard Kalman correction with a ``(cx, cy, w, h)`` observation; resets misses."""
    if math.isinf(cfg.measurement_noise):
        return replace(state, misses=0)
    z = np.asarray(measurement.to_cxcywh())
    P = state.covariance
    S = OBSERVE @ P @ OBSERVE.T + cfg.measurement_cov()
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("innovation covariance is not positive definite") from exc
    PHt = P @ OBSERVE.T
    # K = P H^T S^-1 via two triangular solves
    gain = np.linalg.solve(L.T, np.linalg.solve(L, PHt.T)).T
    innovation = z - OBSERVE @ state.mean
    mean = state.mean + gain @ innovation
    cov = P - gain @ S @ gain.T
    cov = (cov + cov.T) / 2.0
    return replace(state, mean=mean, covariance=cov, misses=0)


@dataclass(frozen=True)
class Matching:
    pairs: tuple[tuple[int, int], ...]
    unmatched_tracks: tuple[int, ...]
    unmatched_dets: tuple[int, ...]


def associate(
    tracks: Sequence[TrackState],
    dets: FrameDetections | Sequence[Detection],
    match_iou: float = 0.3,
) -> Matching:
    """Greedy same-class matching by descending IoU, keeping pairs with IoU >= ``match_iou``.

    Equal IoUs are taken in (track index, detection index) order.
    """
    dlist = dets.detections if isinstance(dets, FrameDetections) else tuple(dets)
    cand = []
    for ti, t in enumerate(tracks):
        tbox = t.box
        for di, d in enumerate(dlist):
            if d.class_id != t.class_id:
                continue
            v = iou(tbox, d.box)
            if v >= match_iou and v > 0:
                cand.append((-v, ti, di))
    cand.sort()
    used_t, used_d, pairs = set(), set(), []
    for _, ti, di in cand:
        if ti in used_t or di in used_d:
            continue
        used_t.add(ti)
        used_d.add(di)
        pairs.append((ti, di))
    return Matching(
        tuple(pairs),
        tuple(i for i in range(len(tracks)) if i not in used_t),
        tuple(i for i in range(len(dlist)) if i not in used_d),
    )


def fuse_box(det: BoundingBox, track_pred: BoundingBox, w: float = 0.7) -> BoundingBox:
    """Blend center and size: ``w * det + (1 - w) * track``."""
    if not 0.0 <= w <= 1.0:
        raise ConfigError("fusion weight must be in [0, 1]")
    a = np.asarray(det.to_cxcywh())
    b = np.asarray(track_pred.to_cxcywh())
    return BoundingBox.from_cxcywh(*(w * a + (1.0 - w) * b))


def track_sequence(
    frames: Sequence[FrameDetections],
    cfg: FuseConfig = FuseConfig(),
    num_frames: int | None = None,
) -> list[FrameDetections]:
    """Fuse per-frame detections with Kalman tracks.

    Frame ids must be strictly increasing.  Ids missing between entries are
    treated as frames without detections, so coasting tracks still emit
    boxes there; ``num_frames`` extends this to trailing frames.  Frames that
    end up with no boxes are omitted from the output.
    """
    for a, b in zip(frames, frames[1:]):
        if b.frame_id <= a.frame_id:
            raise OrderError(f"frame ids out of order: {a.frame_id} then {b.frame_id}")
    if not frames and not num_frames:
        return []
    by_id = {f.frame_id: f for f in frames}
    last = frames[-1].frame_id if frames else -1
    if num_frames is not None:
        last = max(last, num_frames - 1)
    first = frames[0].frame_id if frames else 0

    tracks: list[TrackState] = []
    next_id = 0
    out: list[FrameDetections] = []
    for fid in range(first, last + 1):
        dets = by_id.get(fid, FrameDetections(fid)).detections
        predicted = [kalman_predict(t, cfg) for t in tracks]
        m = associate(predicted, dets, cfg.match_iou)
        emitted: list[Detection] = []
        survivors: list[TrackState] = []
        for ti, di in m.pairs:
            d, t = dets[di], predicted[ti]
            emitted.append(Detection(fuse_box(d.box, t.box, cfg.det_weight), d.class_id, d.score))
            survivors.append(replace(kalman_update(t, d.box, cfg), score=d.score))
        for di in m.unmatched_dets:
            d = dets[di]
            emitted.append(d)
            survivors.append(initiate(d, cfg, next_id))
            next_id += 1
        coasting = []
        for ti in m.unmatched_tracks:
            t = replace(predicted[ti], misses=predicted[ti].misses + 1)
            if t.misses > cfg.max_misses:
                continue
            coasting.append(t)
            score = t.score * cfg.score_decay**t.misses
            emitted.append(Detection(t.box, t.class_id, score, from_track=True))
        tracks = sorted(survivors + coasting, key=lambda t: t.track_id)
        if emitted:
            out.append(FrameDetections(fid, tuple(emitted)))
    return out


def filter_pseudo_labels(
    candidates: FrameDetections,
    references: FrameDetections,
    iou_min: float = 0.2,
) -> tuple[FrameDetections, FrameDetections]:
    """Split candidates by best same-class IoU against the references.

    A candidate is rejected when that IoU is below ``iou_min`` (no
    same-class reference counts as IoU 0).
    """
    if not 0.0 <= iou_min <= 1.0:
        raise ConfigError("iou_min must be in [0, 1]")
    accepted, rejected = [], []
    for d in candidates.detections:
        best = max((iou(d.box, r.box) for r in references.of_class(d.class_id)), default=0.0)
        (rejected if best < iou_min else accepted).append(d)
    fid = candidates.frame_id
    return FrameDetections(fid, tuple(accepted)), FrameDetections(fid, tuple(rejected))


def filter_by_score(dets: FrameDetections, score_min: float = 0.7) -> FrameDetections:
    if not 0.0 <= score_min <= 1.0:
        raise ConfigError("score_min must be in [0, 1]")
    return FrameDetections(dets.frame_id, tuple(d for d in dets.detections if d.score >= score_min))


@dataclass(frozen=True)
class BootstrapResult:
    accepted: list[FrameDetections]
    rejected: list[FrameDetections]
    # per class: candidates seen, passing the score gate, accepted overall
    stats: dict[int, dict[str, int]]


def bootstrap_round(
    detections: Sequence[FrameDetections],
    references: Sequence[FrameDetections],
    iou_min: float = 0.2,
    score_min: float = 0.7,
) -> BootstrapResult:
    """One pseudo-labelling round: score gate, then IoU gate against references."""
    refs = {f.frame_id: f for f in references}
    seen, scored, kept = Counter(), Counter(), Counter()
    accepted, rejected = [], []
    for frame in detections:
        seen.update(d.class_id for d in frame.detections)
        passed = filter_by_score(frame, score_min)
        scored.update(d.class_id for d in passed.detections)
        low = tuple(d for d in frame.detections if d.score < score_min)
        acc, rej = filter_pseudo_labels(passed, refs.get(frame.frame_id, FrameDetections(frame.frame_id)), iou_min)
        kept.update(d.class_id for d in acc.detections)
        if acc.detections:
            accepted.append(acc)
        if rej.detections or low:
            rejected.append(FrameDetections(frame.frame_id, low + rej.detections))
    stats = {
        c: {"candidates": seen[c], "score_passed": scored[c], "accepted": kept[c]}
        for c in sorted(seen)
    }
    return BootstrapResult(accepted, rejected, stats)
