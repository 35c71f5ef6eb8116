"""Seeded synthetic activation videos with known ground-truth boxes.

Every video carries up to three tools (one Gaussian bump each, drawn into its
class channel).  Tools drift with constant velocity, bounce off the
borders and off each other, so consecutive frames are temporally coherent
and trackable, and distinct tools seldom overlap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BoundingBox, ConfigError, Detection, FrameDetections, HeatmapStack

MAX_BLOBS = 3


@dataclass(frozen=True)
class SynthConfig:
    frames: int = 200
    classes: int = 3
    blobs_per_frame: int = 3
    blob_sigma: float = 6.0
    noise_std: float = 0.05
    drop_rate: float = 0.0
    seed: int = 0
    height: int = 96
    width: int = 96
    max_speed: float = 1.0
    # probability that a ground-truth box gets a wrong class id
    label_noise: float = 0.0

    def __post_init__(self):
        if self.frames < 1 or self.classes < 1:
            raise ConfigError("frames and classes must be >= 1")
        if not 1 <= self.blobs_per_frame <= MAX_BLOBS:
            raise ConfigError(f"blobs_per_frame must be in [1, {MAX_BLOBS}]")
        if self.blob_sigma <= 0:
            raise ConfigError("blob_sigma must be > 0")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be >= 0")
        if not 0.0 <= self.drop_rate < 1.0:
            raise ConfigError("drop_rate must be in [0, 1)")
        if not 0.0 <= self.label_noise <= 1.0:
            raise ConfigError("label_noise must be in [0, 1]")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if min(self.height, self.width) < 4 * self.blob_sigma:
            raise ConfigError("frame must be at least 4 sigma on each side")
        if self.max_speed < 0:
            raise ConfigError("max_speed must be >= 0")


def gaussian_blob(height: int, width: int, cx: float, cy: float, sigma: float) -> np.ndarray:
    """Isotropic bump with peak 1 at pixel-center coordinates ``(cx, cy)``."""
    ys = np.arange(height)[:, None] + 0.5
    xs = np.arange(width)[None, :] + 0.5
    return np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2.0 * sigma * sigma))


def blob_box(cx: float, cy: float, sigma: float, height: int, width: int) -> BoundingBox:
    """Ground truth: +-2 sigma around the center, clipped to the frame."""
    r = 2.0 * sigma
    return BoundingBox(max(cx - r, 0.0), max(cy - r, 0.0), min(cx + r, float(width)), min(cy + r, float(height)))


def _place(rng, n, lo, hi, min_sep, attempts=1000):
    """Uniform centers at least ``min_sep`` apart, when the frame allows it."""
    pos = rng.uniform(lo, hi, size=(n, 2))
    for _ in range(attempts):
        d = np.linalg.norm(pos[:, None] - pos[None, :], axis=-1) + np.eye(n) * min_sep
        if d.min() >= min_sep:
            break
        pos = rng.uniform(lo, hi, size=(n, 2))
    return pos


def _collide(pos, vel, min_sep):
    """Elastic exchange of velocity along the center line for approaching close pairs."""
    n = len(pos)
    for i in range(n):
        for j in range(i + 1, n):
            d = pos[i] - pos[j]
            dist2 = float(d @ d)
            closing = float((vel[i] - vel[j]) @ d)
            if dist2 < min_sep * min_sep and closing < 0 and dist2 > 0:
                dv = closing / dist2 * d
                vel[i] -= dv
                vel[j] += dv


def synth_scenes(cfg: SynthConfig) -> tuple[HeatmapStack, list[FrameDetections]]:
    """Heatmap stack and per-frame ground truth (every frame listed, maybe empty)."""
    rng = np.random.default_rng(cfg.seed)
    n = min(cfg.blobs_per_frame, MAX_BLOBS)
    replace = n > cfg.classes
    classes = rng.choice(cfg.classes, size=n, replace=replace)
    margin = cfg.blob_sigma
    lo = np.array([margin, margin])
    hi = np.array([cfg.width - margin, cfg.height - margin])
    min_sep = 4.0 * cfg.blob_sigma
    pos = _place(rng, n, lo, hi, min_sep)
    angle = rng.uniform(0.0, 2.0 * np.pi, size=n)
    speed = rng.uniform(0.25, 1.0, size=n) * cfg.max_speed
    vel = np.stack([np.cos(angle), np.sin(angle)], axis=1) * speed[:, None]

    data = np.zeros((cfg.frames, cfg.classes, cfg.height, cfg.width), dtype=np.float32)
    gt: list[FrameDetections] = []
    for f in range(cfg.frames):
        if f:
            pos = pos + vel
            for axis in range(2):
                below, above = pos[:, axis] < lo[axis], pos[:, axis] > hi[axis]
                pos[below, axis] = 2 * lo[axis] - pos[below, axis]
                pos[above, axis] = 2 * hi[axis] - pos[above, axis]
                vel[below | above, axis] *= -1
            _collide(pos, vel, min_sep)
        keep = rng.random(n) >= cfg.drop_rate
        relabel = rng.random(n) < cfg.label_noise
        wrong = rng.integers(0, max(cfg.classes - 1, 1), size=n)
        frame = np.zeros((cfg.classes, cfg.height, cfg.width))
        boxes = []
        for b in range(n):
            if not keep[b]:
                continue
            cx, cy = pos[b]
            c = int(classes[b])
            frame[c] = np.maximum(frame[c], gaussian_blob(cfg.height, cfg.width, cx, cy, cfg.blob_sigma))
            label = c
            if relabel[b] and cfg.classes > 1:
                label = int(wrong[b]) + (wrong[b] >= c)
            boxes.append(Detection(blob_box(cx, cy, cfg.blob_sigma, cfg.height, cfg.width), label, 1.0))
        if cfg.noise_std > 0:
            frame = frame + rng.normal(0.0, cfg.noise_std, size=frame.shape)
        data[f] = np.clip(frame, 0.0, 1.0)
        gt.append(FrameDetections(f, tuple(boxes)))
    return HeatmapStack(data), gt
