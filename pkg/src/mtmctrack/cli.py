"""Command-line front end: preprocess, track, evaluate, synth.

Data goes to files or stdout; diagnostics go to stderr; exit code 0 means
the command completed.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

import numpy as np

from . import io_formats, mct, metrics, sct
from .geometry import confidence_filter, nms
from .model import Detection, IdentityCluster, PipelineConfig, validate_config
from .synthgen import generate_world, render_detections


def _log(args, *message) -> None:
    if getattr(args, "verbose", 0):
        print(*message, file=sys.stderr)


def _load_config(path) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    return io_formats.parse_config(path)


def preprocess_detections(detections: list[Detection],
                          config: PipelineConfig) -> list[Detection]:
    """Confidence filter then per-(camera, frame) NMS; idempotent."""
    kept = confidence_filter(detections, config.detection_confidence_threshold)
    groups: dict[tuple[int, int], list[Detection]] = {}
    for d in kept:
        groups.setdefault((d.camera, d.frame), []).append(d)
    out: list[Detection] = []
    for key in sorted(groups):
        out.extend(nms(groups[key], config.nms_iou_threshold))
    return out


def cmd_preprocess(args) -> int:
    config = _load_config(args.config)
    detections = io_formats.parse_detections(args.detections)
    features = None
    if args.features_in:
        features = io_formats.parse_features(args.features_in, len(detections))
        detections = io_formats.pair_features(detections, features)
    kept = preprocess_detections(detections, config)
    if args.features_in:
        io_formats.write_features([d.feature for d in kept], args.features_out)
        kept = [dataclasses.replace(d, feature=None) for d in kept]
    io_formats.write_detections(kept, args.out)
    print(f"detections_in={len(detections)}")
    print(f"detections_out={len(kept)}")
    return 0


def _track_one_camera(payload):
    camera, detections, config = payload
    return camera, sct.track_camera(detections, config)


def cmd_track(args) -> int:
    config = _load_config(args.config)
    detections = io_formats.parse_detections(args.detections)
    features = io_formats.parse_features(args.features, len(detections))
    if config.normalize_features:
        features = [f / n if (n := float(np.linalg.norm(f))) > 0 else f for f in features]
    detections = io_formats.pair_features(detections, features)
    detections = preprocess_detections(detections, config)
    _log(args, f"tracking {len(detections)} detections")

    by_camera: dict[int, list[Detection]] = {}
    for d in detections:
        by_camera.setdefault(d.camera, []).append(d)
    cameras = sorted(by_camera)

    jobs = args.jobs if args.jobs else (os.cpu_count() or 1)
    jobs = max(1, min(jobs, len(cameras) or 1))
    if jobs > 1 and len(cameras) > 1:
        import multiprocessing

        with multiprocessing.Pool(jobs) as pool:
            results = pool.map(_track_one_camera,
                               [(c, by_camera[c], config) for c in cameras])
        results.sort(key=lambda r: r[0])
        per_camera = {camera: trajs for camera, trajs in results}
    else:
        per_camera = {c: sct.track_camera(by_camera[c], config) for c in cameras}

    trajectories = []
    for c in cameras:
        print(f"camera_{c}_trajectories={len(per_camera[c])}")
        trajectories.extend(per_camera[c])

    if args.sct_only:
        clusters = [IdentityCluster(label, (t,))
                    for label, t in enumerate(trajectories, start=1)]
    else:
        clusters = mct.merge_trajectories(trajectories, config)
    print(f"identities={len(clusters)}")
    io_formats.write_trajectories(clusters, args.out)
    return 0


def cmd_evaluate(args) -> int:
    gt = io_formats.parse_trajectories(args.gt)
    hyp = io_formats.parse_trajectories(args.hyp)
    report = metrics.id_measures(gt, hyp)
    sys.stdout.write(io_formats.format_report(report))
    if args.row:
        io_formats.append_report_row(report, args.row)
    return 0


def cmd_synth(args) -> int:
    wc = io_formats.parse_world_config(args.world)
    nc = io_formats.parse_noise_config(args.noise)
    if args.seed is not None:
        wc = dataclasses.replace(wc, seed=args.seed)
    gt = generate_world(wc)
    detections, _labels = render_detections(gt, nc, wc.seed + 1)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    io_formats.write_detections(detections, out_dir / "detections.txt")
    io_formats.write_features([d.feature for d in detections], out_dir / "features.txt")
    io_formats.write_trajectories(gt, out_dir / "ground_truth.txt")
    print(f"identities={len(gt)}")
    print(f"detections={len(detections)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mtmctrack",
        description="Multi-target, multi-camera tracking pipeline",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="confidence-filter and NMS a detection file")
    p.add_argument("--detections", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--features-in", default=None,
                   help="paired feature file to subset alongside the detections")
    p.add_argument("--features-out", default=None)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("track", help="run the full tracking pipeline")
    p.add_argument("--detections", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--sct-only", action="store_true",
                   help="skip cross-camera association; one identity per trajectory")
    p.add_argument("--jobs", type=int, default=0,
                   help="per-camera worker processes (default: number of processors)")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("evaluate", help="identity metrics between two trajectory files")
    p.add_argument("--gt", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--row", default=None, help="append a machine-readable CSV row here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="generate a synthetic scenario")
    p.add_argument("--world", required=True)
    p.add_argument("--noise", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "preprocess" and bool(args.features_in) != bool(args.features_out):
        print("error: --features-in and --features-out must be given together",
              file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
