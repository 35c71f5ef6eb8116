"""Command-line entry point: ``toolloc <subcommand> ...``.

Exit codes: 0 success, 2 bad input or format, 3 evaluation-domain error
(no ground truth).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import calib, io
from .cam2box import LocalizeConfig, localize_frame
from .core import EmptyGroundTruth, ShapeError, ToolLocError, sigmoid
from .metrics import EvalConfig, mean_ap, multilabel_f1
from .synth import SynthConfig, synth_scenes
from .trackfuse import FuseConfig, bootstrap_round, track_sequence

log = logging.getLogger("toolloc")

EXIT_OK, EXIT_INPUT, EXIT_DOMAIN = 0, 2, 3


def cmd_synth(args) -> int:
    cfg = SynthConfig(
        frames=args.frames,
        classes=args.classes,
        blobs_per_frame=args.blobs,
        blob_sigma=args.blob_sigma,
        noise_std=args.noise_std,
        drop_rate=args.drop_rate,
        seed=args.seed,
        height=args.height,
        width=args.width,
        max_speed=args.max_speed,
        label_noise=args.label_noise,
    )
    stack, gt = synth_scenes(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_camt(out / "cams.camt", stack)
    io.write_detections(out / "gt.json", gt, io.class_header(cfg.classes), cfg.frames)
    print(f"wrote {out / 'cams.camt'} and {out / 'gt.json'}")
    return EXIT_OK


def _localize_chunk(payload):
    frames, first, cfg = payload
    return [localize_frame(fr, cfg, first + i) for i, fr in enumerate(frames)]


def cmd_localize(args) -> int:
    stack = io.read_camt(args.cams)
    cfg = LocalizeConfig(
        threshold_mode=args.method,
        fixed_sigma=args.sigma,
        presence_threshold=args.presence_thresh,
        min_component_area=args.min_area,
        dedup_iou=args.dedup_iou,
        connectivity=args.connectivity,
        histogram_bins=args.bins,
    )
    if args.workers > 1:
        step = max(1, -(-stack.frames // (4 * args.workers)))
        chunks = [(stack.data[i : i + step], i, cfg) for i in range(0, stack.frames, step)]
        with ProcessPoolExecutor(args.workers) as pool:
            results = [fd for part in pool.map(_localize_chunk, chunks) for fd in part]
    else:
        results = _localize_chunk((stack.data, 0, cfg))
    frames = [fd for fd in results if fd.detections]
    io.write_detections(args.out, frames, io.class_header(stack.classes), stack.frames)
    n = sum(len(f.detections) for f in frames)
    print(f"{n} boxes in {len(frames)} of {stack.frames} frames -> {args.out}")
    return EXIT_OK


def _read_pair(logits_path, labels_path):
    names, z = io.read_matrix(logits_path)
    lnames, y = io.read_matrix(labels_path)
    if z.shape != y.shape:
        raise ShapeError(f"logits {z.shape} and labels {y.shape} differ in shape")
    if not np.all((y == 0) | (y == 1)):
        raise ShapeError("labels must be 0 or 1")
    return names, z, y


def cmd_calibrate(args) -> int:
    names, z, y = _read_pair(args.logits, args.labels)
    warnings: list[str] = []
    table = calib.fit_logit_shift(z, y, warnings)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    io.write_shifts(args.out, table, names)
    probs = calib.apply_calibration(z, table)
    _, before = multilabel_f1(calib.cast_presence(sigmoid(z)), y)
    _, after = multilabel_f1(calib.cast_presence(probs), y)
    print(f"macro F1 at 0.5: {before:.4f} before, {after:.4f} after -> {args.out}")
    return EXIT_OK


def cmd_classify(args) -> int:
    shifts = args.shifts or []
    if shifts and len(shifts) != len(args.logits):
        raise ShapeError("give one --shifts file per --logits file, or none")
    probs, names = [], None
    for i, path in enumerate(args.logits):
        cols, z = io.read_matrix(path)
        if names is not None and cols != names:
            raise ShapeError(f"{path}: class columns differ from the first logits file")
        names = cols
        table = io.read_shifts(shifts[i])[1] if shifts else calib.CalibrationTable.zeros(z.shape[1])
        probs.append(calib.apply_calibration(z, table))
    p = calib.ensemble_mean(probs)
    if args.probs_out:
        io.write_matrix(args.probs_out, names, p)
    io.write_matrix(args.out, names, calib.cast_presence(p, args.presence_thresh), fmt="{:d}")
    print(f"{p.shape[0]} samples x {p.shape[1]} classes -> {args.out}")
    return EXIT_OK


def cmd_track(args) -> int:
    classes, frames, num_frames = io.read_detections(args.dets)
    cfg = FuseConfig(det_weight=args.fuse_weight, match_iou=args.match_iou, max_misses=args.max_misses)
    out = track_sequence(frames, cfg, num_frames)
    io.write_detections(args.out, out, classes, num_frames)
    n_track = sum(d.from_track for f in out for d in f.detections)
    print(f"{sum(len(f.detections) for f in out)} boxes ({n_track} from tracks) -> {args.out}")
    return EXIT_OK


def cmd_pseudo(args) -> int:
    classes, dets, num_frames = io.read_detections(args.dets)
    ref_classes, refs, _ = io.read_detections(args.refs)
    if ref_classes != classes:
        raise ShapeError("detections and references list different classes")
    res = bootstrap_round(dets, refs, args.iou_min, args.score_min)
    io.write_detections(args.out, res.accepted, classes, num_frames)
    if args.rejected_out:
        io.write_detections(args.rejected_out, res.rejected, classes, num_frames)
    print(json.dumps({classes[c]: s for c, s in res.stats.items()}, indent=1))
    return EXIT_OK


def cmd_eval(args) -> int:
    if args.presence or args.labels:
        if not (args.presence and args.labels):
            raise ShapeError("presence evaluation needs both --presence and --labels")
        names, pred = io.read_matrix(args.presence)
        _, truth = io.read_matrix(args.labels)
        if pred.shape != truth.shape:
            raise ShapeError(f"presence {pred.shape} and labels {truth.shape} differ in shape")
        per, mean = multilabel_f1(pred > 0.5, truth > 0.5)
        print(json.dumps({"per_class_f1": per, "mean_f1": mean}, indent=1))
        for n, v in zip(names, per):
            print(f"{n:<12} {'-' if v is None else f'{v:.4f}'}")
        print(f"{'mean':<12} {mean:.4f}")
        return EXIT_OK
    if not (args.pred and args.gt):
        raise ShapeError("detection evaluation needs --pred and --gt")
    classes, pred, _ = io.read_detections(args.pred)
    gt_classes, gt, _ = io.read_detections(args.gt)
    if len(classes) != len(gt_classes):
        raise ShapeError("prediction and ground-truth files list different class counts")
    report = mean_ap(pred, gt, EvalConfig(args.iou, not args.no_track_boxes), len(gt_classes))
    doc = json.dumps(report.to_dict(), indent=1)
    if args.out:
        Path(args.out).write_text(doc + "\n")
    print(doc)
    print(report.table(gt_classes))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="toolloc", description="Heatmap-to-box localization, calibration, tracking and evaluation.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic CAMT video with ground truth")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--frames", type=int, default=200)
    s.add_argument("--classes", type=int, default=3)
    s.add_argument("--blobs", type=int, default=3)
    s.add_argument("--blob-sigma", type=float, default=6.0)
    s.add_argument("--noise-std", type=float, default=0.05)
    s.add_argument("--drop-rate", type=float, default=0.0)
    s.add_argument("--label-noise", type=float, default=0.0)
    s.add_argument("--height", type=int, default=96)
    s.add_argument("--width", type=int, default=96)
    s.add_argument("--max-speed", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("localize", help="heatmaps to boxes")
    s.add_argument("--cams", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--method", choices=["otsu", "fixed"], default="otsu")
    s.add_argument("--sigma", type=float, default=0.5)
    s.add_argument("--presence-thresh", type=float, default=0.5)
    s.add_argument("--min-area", type=int, default=4)
    s.add_argument("--dedup-iou", type=float, default=0.5)
    s.add_argument("--connectivity", type=int, choices=[4, 8], default=8)
    s.add_argument("--bins", type=int, default=256)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_localize)

    s = sub.add_parser("calibrate", help="fit per-class logit shifts")
    s.add_argument("--logits", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("classify", help="shift, ensemble and cast presence")
    s.add_argument("--logits", required=True, action="append")
    s.add_argument("--shifts", action="append")
    s.add_argument("--presence-thresh", type=float, default=0.5)
    s.add_argument("--out", required=True)
    s.add_argument("--probs-out")
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("track", help="Kalman detection/track fusion")
    s.add_argument("--dets", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--fuse-weight", type=float, default=0.7)
    s.add_argument("--match-iou", type=float, default=0.3)
    s.add_argument("--max-misses", type=int, default=5)
    s.set_defaults(func=cmd_track)

    s = sub.add_parser("pseudo-label", help="score and IoU gates for pseudo-labels")
    s.add_argument("--dets", required=True)
    s.add_argument("--refs", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--rejected-out")
    s.add_argument("--iou-min", type=float, default=0.2)
    s.add_argument("--score-min", type=float, default=0.7)
    s.set_defaults(func=cmd_pseudo)

    s = sub.add_parser("eval", help="mAP and F1 report")
    s.add_argument("--pred")
    s.add_argument("--gt")
    s.add_argument("--iou", type=float, default=0.5)
    s.add_argument("--no-track-boxes", action="store_true")
    s.add_argument("--presence", help="binary presence CSV (F1-only mode)")
    s.add_argument("--labels", help="ground-truth presence CSV (F1-only mode)")
    s.add_argument("--out", help="also write the JSON report here")
    s.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except EmptyGroundTruth as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (ToolLocError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
