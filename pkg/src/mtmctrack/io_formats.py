"""Text formats: detections, features, trajectories, configs, reports.

All writers emit fixed 6-decimal floats and stable orderings so identical
inputs produce byte-identical files.
"""

from __future__ import annotations

import dataclasses
import math
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .metrics import IdMetricsReport
from .model import (
    BoundingBox,
    Detection,
    IdentityCluster,
    PipelineConfig,
    Trajectory,
    TrajectoryEntry,
    validate_config,
)
from .synthgen import NoiseConfig, WorldConfig, fully_connected_transitions


class FormatError(ValueError):
    """Malformed input file."""


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _parse_number(token: str, line_no: int, name: str, want_int: bool):
    token = token.strip()
    try:
        value = int(token) if want_int else float(token)
    except ValueError:
        raise FormatError(f"line {line_no}: field {name!r} is not a number: {token!r}") from None
    if not want_int and not math.isfinite(value):
        raise FormatError(f"line {line_no}: field {name!r} is not finite: {token!r}")
    return value


_DETECTION_FIELDS = ("camera", "frame", "left", "top", "right", "bottom", "confidence")


def parse_detections(path) -> list[Detection]:
    """Read a detection file: camera, frame, left, top, right, bottom, confidence."""
    detections: list[Detection] = []
    with open(path, "r", encoding="ascii") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 7:
                raise FormatError(f"line {line_no}: expected 7 fields, got {len(parts)}")
            camera = _parse_number(parts[0], line_no, "camera", True)
            frame = _parse_number(parts[1], line_no, "frame", True)
            if camera < 1:
                raise FormatError(f"line {line_no}: field 'camera' must be >= 1")
            if frame < 0:
                raise FormatError(f"line {line_no}: field 'frame' must be >= 0")
            coords = [_parse_number(parts[2 + k], line_no, _DETECTION_FIELDS[2 + k], False)
                      for k in range(4)]
            if not (coords[0] < coords[2] and coords[1] < coords[3]):
                raise FormatError(f"line {line_no}: inverted box (left >= right or top >= bottom)")
            confidence = _parse_number(parts[6], line_no, "confidence", False)
            if not (0.0 <= confidence <= 1.0):
                raise FormatError(f"line {line_no}: field 'confidence' must lie in [0, 1]")
            detections.append(Detection(camera, frame, BoundingBox(*coords), confidence))
    return detections


def write_detections(detections: Sequence[Detection], path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for d in detections:
            b = d.box
            fh.write(f"{d.camera},{d.frame},{_fmt(b.left)},{_fmt(b.top)},"
                     f"{_fmt(b.right)},{_fmt(b.bottom)},{_fmt(d.confidence)}\n")


def parse_features(path, expected_count: int) -> list[np.ndarray]:
    """Read a feature file: header 'd=<dim>', then one row per detection."""
    vectors: list[np.ndarray] = []
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if not header.startswith("d="):
            raise FormatError("line 1: missing 'd=<dimension>' header")
        try:
            dim = int(header[2:])
        except ValueError:
            raise FormatError(f"line 1: bad dimension {header[2:]!r}") from None
        if dim < 1:
            raise FormatError("line 1: dimension must be >= 1")
        for line_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != dim:
                raise FormatError(f"line {line_no}: expected {dim} values, got {len(parts)}")
            row = np.array([_parse_number(p, line_no, "feature", False) for p in parts])
            vectors.append(row)
    if len(vectors) != expected_count:
        raise FormatError(f"feature count {len(vectors)} does not match "
                          f"detection count {expected_count}")
    return vectors


def write_features(features: Sequence[np.ndarray], path) -> None:
    if features:
        dim = len(features[0])
        for f in features:
            if len(f) != dim:
                raise ValueError("feature vectors must share one dimension")
    else:
        dim = 0
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"d={dim}\n")
        for f in features:
            fh.write(",".join(_fmt(float(x)) for x in f) + "\n")


def pair_features(detections: Sequence[Detection],
                  features: Sequence[np.ndarray]) -> list[Detection]:
    """Attach features to detections positionally."""
    if len(detections) != len(features):
        raise FormatError(f"feature count {len(features)} does not match "
                          f"detection count {len(detections)}")
    return [dataclasses.replace(d, feature=f) for d, f in zip(detections, features)]


def write_trajectories(clusters: Sequence[IdentityCluster], path) -> None:
    """Write identity clusters (features excluded), sorted by identity, camera, frame."""
    rows = []
    seen: set[tuple[int, int, int]] = set()
    for cluster in clusters:
        for t in cluster.members:
            for e in t.entries:
                key = (cluster.identity, t.camera, e.frame)
                if key in seen:
                    raise ValueError(f"duplicate (identity, camera, frame) triple {key}")
                seen.add(key)
                rows.append((cluster.identity, t.camera, e.frame, e.box, e.interpolated))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for ident, camera, frame, box, interp in rows:
            fh.write(f"{ident},{camera},{frame},{_fmt(box.left)},{_fmt(box.top)},"
                     f"{_fmt(box.right)},{_fmt(box.bottom)},{1 if interp else 0}\n")


def parse_trajectories(path) -> list[IdentityCluster]:
    """Read a trajectory file back into identity clusters.

    Rows of one (identity, camera) pair are split into contiguous frame runs;
    each run becomes one trajectory.
    """
    rows: dict[tuple[int, int], list[tuple[int, BoundingBox, bool]]] = {}
    seen: set[tuple[int, int, int]] = set()
    with open(path, "r", encoding="ascii") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 8:
                raise FormatError(f"line {line_no}: expected 8 fields, got {len(parts)}")
            ident = _parse_number(parts[0], line_no, "identity", True)
            camera = _parse_number(parts[1], line_no, "camera", True)
            frame = _parse_number(parts[2], line_no, "frame", True)
            coords = [_parse_number(parts[3 + k], line_no, "box", False) for k in range(4)]
            if not (coords[0] < coords[2] and coords[1] < coords[3]):
                raise FormatError(f"line {line_no}: inverted box")
            flag = parts[7].strip()
            if flag not in ("0", "1"):
                raise FormatError(f"line {line_no}: field 'interpolated' must be 0 or 1")
            key = (ident, camera, frame)
            if key in seen:
                raise FormatError(f"line {line_no}: duplicate (identity, camera, frame) {key}")
            seen.add(key)
            rows.setdefault((ident, camera), []).append(
                (frame, BoundingBox(*coords), flag == "1"))

    by_identity: dict[int, list[Trajectory]] = {}
    for (ident, camera), items in sorted(rows.items()):
        items.sort(key=lambda r: r[0])
        run: list[TrajectoryEntry] = []
        prev_frame: Optional[int] = None
        for frame, box, interp in items:
            if prev_frame is not None and frame != prev_frame + 1 and run:
                by_identity.setdefault(ident, []).append(Trajectory(camera, tuple(run)))
                run = []
            run.append(TrajectoryEntry(frame, box, None, interp))
            prev_frame = frame
        if run:
            by_identity.setdefault(ident, []).append(Trajectory(camera, tuple(run)))

    return [IdentityCluster(ident, tuple(members))
            for ident, members in sorted(by_identity.items())]


# -- flat key = value configs -------------------------------------------------

def _read_kv(path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, "r", encoding="ascii") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise FormatError(f"line {line_no}: expected 'key = value'")
            key, value = line.split("=", 1)
            key = key.strip()
            if key in out:
                raise FormatError(f"line {line_no}: duplicate key {key!r}")
            out[key] = value.strip()
    return out


def _parse_bool(value: str, key: str) -> bool:
    lowered = value.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise FormatError(f"key {key!r}: expected a boolean, got {value!r}")


def _parse_pairs(value: str, key: str) -> frozenset:
    value = value.strip()
    if not value or value.lower() == "none":
        return frozenset()
    pairs = set()
    for token in value.split(","):
        bits = token.strip().split("-")
        if len(bits) != 2:
            raise FormatError(f"key {key!r}: expected pairs like '2-8', got {token!r}")
        try:
            a, b = int(bits[0]), int(bits[1])
        except ValueError:
            raise FormatError(f"key {key!r}: bad pair {token!r}") from None
        pairs.add((min(a, b), max(a, b)))
    return frozenset(pairs)


def _parse_range(value: str, key: str, want_int: bool):
    bits = value.split("-")
    if len(bits) != 2:
        raise FormatError(f"key {key!r}: expected a range like '30-100', got {value!r}")
    try:
        lo = int(bits[0]) if want_int else float(bits[0])
        hi = int(bits[1]) if want_int else float(bits[1])
    except ValueError:
        raise FormatError(f"key {key!r}: bad range {value!r}") from None
    return (lo, hi)


def _convert(value: str, kind: str, key: str):
    if kind == "int":
        try:
            return int(value)
        except ValueError:
            raise FormatError(f"key {key!r}: expected an integer, got {value!r}") from None
    if kind == "float":
        try:
            out = float(value)
        except ValueError:
            raise FormatError(f"key {key!r}: expected a number, got {value!r}") from None
        return out
    if kind == "bool":
        return _parse_bool(value, key)
    if kind == "pairs":
        return _parse_pairs(value, key)
    if kind == "int_range":
        return _parse_range(value, key, True)
    if kind == "float_range":
        return _parse_range(value, key, False)
    raise AssertionError(kind)


_PIPELINE_KEYS = {
    "s": "float",
    "iou_gate": "float",
    "window_frames": "int",
    "neighbor_frames": "int",
    "speed_threshold": "float",
    "overlap_iou_threshold": "float",
    "smoothing_window": "int",
    "rerank_k1": "int",
    "rerank_k2": "int",
    "rerank_lambda": "float",
    "mct_merge_threshold": "float",
    "max_gap_frames": "int",
    "overlapping_camera_pairs": "pairs",
    "fps": "int",
    "detection_confidence_threshold": "float",
    "nms_iou_threshold": "float",
    "sct_merge_threshold": "float",
    "normalize_features": "bool",
}


def parse_config(path) -> PipelineConfig:
    """Read a pipeline config; missing keys take defaults, unknown keys fail."""
    raw = _read_kv(path)
    kwargs = {}
    for key, value in raw.items():
        kind = _PIPELINE_KEYS.get(key)
        if kind is None:
            raise FormatError(f"unknown config key {key!r}")
        kwargs[key] = _convert(value, kind, key)
    config = PipelineConfig(**kwargs)
    violations = validate_config(config)
    if violations:
        raise FormatError("invalid config: " + "; ".join(violations))
    return config


_WORLD_KEYS = {
    "seed": "int",
    "n_identities": "int",
    "n_cameras": "int",
    "overlapping_camera_pairs": "pairs",
    "fps": "int",
    "duration_s": "float",
    "walk_speed": "float_range",
    "box_width": "float_range",
    "box_height": "float_range",
    "visit_frames": "int_range",
    "travel_frames": "int_range",
    "transitions": "transitions",
    "image_width": "float",
    "image_height": "float",
}


def _parse_transitions(value: str, key: str) -> dict:
    out = {}
    for token in value.split(","):
        token = token.strip()
        try:
            pair, rng = token.split(":")
            a, b = pair.split(">")
            lo, hi = rng.split("-")
            out[(int(a), int(b))] = (int(lo), int(hi))
        except ValueError:
            raise FormatError(f"key {key!r}: expected entries like '1>2:30-100', "
                              f"got {token!r}") from None
    return out


def parse_world_config(path) -> WorldConfig:
    """Read a world config; 'travel_frames' expands to a fully connected graph
    when no explicit 'transitions' are given."""
    raw = _read_kv(path)
    kwargs = {}
    travel_range = None
    for key, value in raw.items():
        kind = _WORLD_KEYS.get(key)
        if kind is None:
            raise FormatError(f"unknown world config key {key!r}")
        if key == "transitions":
            kwargs[key] = _parse_transitions(value, key)
        elif key == "travel_frames":
            travel_range = _parse_range(value, key, True)
        elif key in ("image_width", "image_height"):
            kwargs[key] = _convert(value, kind, key)
        else:
            kwargs[key] = _convert(value, kind, key)
    width = kwargs.pop("image_width", WorldConfig.image_size[0])
    height = kwargs.pop("image_height", WorldConfig.image_size[1])
    kwargs["image_size"] = (width, height)
    wc = WorldConfig(**kwargs)
    if not wc.transitions and wc.n_cameras > 1:
        lo, hi = travel_range if travel_range else (30, 120)
        wc = dataclasses.replace(
            wc, transitions=fully_connected_transitions(wc.n_cameras, lo, hi))
    return wc


_NOISE_KEYS = {
    "jitter_sigma": "float",
    "miss_rate": "float",
    "false_alarm_rate": "float",
    "feature_dim": "int",
    "embedding_separation": "float",
    "feature_sigma": "float",
}


def parse_noise_config(path) -> NoiseConfig:
    raw = _read_kv(path)
    kwargs = {}
    for key, value in raw.items():
        kind = _NOISE_KEYS.get(key)
        if kind is None:
            raise FormatError(f"unknown noise config key {key!r}")
        kwargs[key] = _convert(value, kind, key)
    return NoiseConfig(**kwargs)


# -- metric reports -----------------------------------------------------------

def format_report(report: IdMetricsReport) -> str:
    """Flat key-value block, one metric per line."""
    return (
        f"idf1={_fmt(report.idf1)}\n"
        f"idp={_fmt(report.idp)}\n"
        f"idr={_fmt(report.idr)}\n"
        f"idtp={report.idtp}\n"
        f"idfp={report.idfp}\n"
        f"idfn={report.idfn}\n"
    )


REPORT_ROW_HEADER = "idf1,idp,idr,idtp,idfp,idfn"


def report_row(report: IdMetricsReport) -> str:
    """Machine-readable CSV row matching REPORT_ROW_HEADER."""
    return (f"{_fmt(report.idf1)},{_fmt(report.idp)},{_fmt(report.idr)},"
            f"{report.idtp},{report.idfp},{report.idfn}")


def append_report_row(report: IdMetricsReport, path) -> None:
    p = Path(path)
    new = not p.exists() or p.stat().st_size == 0
    with open(p, "a", encoding="ascii", newline="\n") as fh:
        if new:
            fh.write(REPORT_ROW_HEADER + "\n")
        fh.write(report_row(report) + "\n")
