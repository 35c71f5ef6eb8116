"""Readers and writers for the on-disk formats.

* CAMT: binary activation tensor.  24-byte little-endian header
  (``b"CAMT"``, u16 version = 1, u16 reserved = 0, u32 F, C, H, W)
  followed by ``F*C*H*W`` float32 values, frame-major, then class, then row.
* Detections: JSON ``{"classes": [...], "frames": [{"frame_id", "boxes"}]}``.
* Matrices (logits, labels, presence): CSV with a ``class_0,...`` header row.
* Calibration: JSON ``{"classes": [...], "shifts": [...]}``.
"""

from __future__ import annotations

import csv
import json
import math
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from .calib import CalibrationTable
from .core import BoundingBox, Detection, FormatError, FrameDetections, HeatmapStack, ToolLocError

CAMT_MAGIC = b"CAMT"
CAMT_VERSION = 1
_HEADER = struct.Struct("<4sHH4I")


def write_camt(path, stack: HeatmapStack) -> None:
    f, c, h, w = stack.shape
    payload = np.ascontiguousarray(stack.data, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(CAMT_MAGIC, CAMT_VERSION, 0, f, c, h, w))
        fh.write(payload.tobytes())


def read_camt(path) -> HeatmapStack:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError("invalid CAMT header: file too short")
    magic, version, reserved, f, c, h, w = _HEADER.unpack_from(raw)
    if magic != CAMT_MAGIC or version != CAMT_VERSION or reserved != 0:
        raise FormatError("invalid CAMT header")
    if min(f, c, h, w) < 1:
        raise FormatError("invalid CAMT header: zero dimension")
    expected = f * c * h * w * 4
    body = len(raw) - _HEADER.size
    if body != expected:
        raise FormatError(f"CAMT payload is {body} bytes, header implies {expected}")
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(f, c, h, w)
    if not np.all(np.isfinite(data)):
        raise FormatError("CAMT payload contains NaN or Inf")
    return HeatmapStack(data.astype(np.float32))


def _box_dict(d: Detection) -> dict:
    out = {
        "class_id": d.class_id,
        "score": d.score,
        "x_min": d.box.x_min,
        "y_min": d.box.y_min,
        "x_max": d.box.x_max,
        "y_max": d.box.y_max,
    }
    if d.from_track:
        out["from_track"] = True
    return out


def detections_to_json(
    frames: Sequence[FrameDetections],
    classes: Sequence[str],
    num_frames: int | None = None,
) -> str:
    doc: dict = {"classes": list(classes)}
    if num_frames is not None:
        doc["num_frames"] = num_frames
    doc["frames"] = [
        {"frame_id": f.frame_id, "boxes": [_box_dict(d) for d in f.detections]} for f in frames
    ]
    return json.dumps(_plain(doc), indent=1) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def write_detections(path, frames, classes, num_frames=None) -> None:
    Path(path).write_text(detections_to_json(frames, classes, num_frames))


def read_detections(path) -> tuple[list[str], list[FrameDetections], int | None]:
    """Parse a detections file; returns ``(classes, frames, num_frames)``."""
    try:
        doc = json.loads(Path(path).read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    try:
        classes = [str(c) for c in doc["classes"]]
        num_frames = doc.get("num_frames")
        frames = []
        for fr in doc["frames"]:
            dets = []
            for b in fr["boxes"]:
                cid = int(b["class_id"])
                if not 0 <= cid < len(classes):
                    raise FormatError(f"class_id {cid} outside the {len(classes)} listed classes")
                coords = [float(b[k]) for k in ("x_min", "y_min", "x_max", "y_max")]
                score = float(b["score"])
                if not all(math.isfinite(v) for v in coords + [score]):
                    raise FormatError("non-finite value in boxes")
                dets.append(Detection(BoundingBox(*coords), cid, score, bool(b.get("from_track", False))))
            frames.append(FrameDetections(int(fr["frame_id"]), tuple(dets)))
    except FormatError:
        raise
    except ToolLocError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise FormatError(f"{path}: malformed detections document ({exc!r})") from exc
    for a, b in zip(frames, frames[1:]):
        if b.frame_id <= a.frame_id:
            raise FormatError(f"{path}: frame ids must be strictly increasing")
    if num_frames is not None and (not isinstance(num_frames, int) or num_frames < 0):
        raise FormatError(f"{path}: num_frames must be a non-negative integer")
    return classes, frames, num_frames


def class_header(k: int) -> list[str]:
    return [f"class_{c}" for c in range(k)]


def read_matrix(path) -> tuple[list[str], np.ndarray]:
    """CSV with a header row and one numeric row per sample."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: not a text file") from exc
    if not rows:
        raise FormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=np.float64)
    except ValueError as exc:
        raise FormatError(f"{path}: non-numeric value ({exc})") from exc
    if data.size == 0:
        data = data.reshape(0, len(header))
    if data.ndim != 2 or data.shape[1] != len(header):
        raise FormatError(f"{path}: rows do not all have {len(header)} columns")
    if not np.all(np.isfinite(data)):
        raise FormatError(f"{path}: NaN or Inf value")
    return header, data


def write_matrix(path, header: Sequence[str], data, fmt: str = "{!r}") -> None:
    arr = np.asarray(data)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in arr.tolist():
            w.writerow([fmt.format(v) for v in row])


def write_shifts(path, table: CalibrationTable, classes: Sequence[str]) -> None:
    doc = {"classes": list(classes), "shifts": list(table.shifts)}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def read_shifts(path) -> tuple[list[str], CalibrationTable]:
    try:
        doc = json.loads(Path(path).read_text())
        return [str(c) for c in doc["classes"]], CalibrationTable(tuple(float(s) for s in doc["shifts"]))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError, ToolLocError) as exc:
        raise FormatError(f"{path}: malformed shifts file ({exc})") from exc
