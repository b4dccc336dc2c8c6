"""Shared domain types and pipeline configuration."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

# Appearance feature: 1-D float vector, dimension fixed per run and
# discovered from the feature file header.
Feature = np.ndarray


class BoundingBox(NamedTuple):
    """Axis-aligned box in image coordinates (y grows downward).

    A plain tuple for speed; `validate()` enforces the positive-area and
    finiteness invariants and is called wherever boxes enter the system.
    """

    left: float
    top: float
    right: float
    bottom: float

    def validate(self) -> "BoundingBox":
        if not all(math.isfinite(v) for v in self):
            raise ValueError(f"box coordinates must be finite: {tuple(self)}")
        if not (self.left < self.right and self.top < self.bottom):
            raise ValueError(f"box must have strictly positive area: {tuple(self)}")
        return self

    @property
    def width(self) -> float:
        return self.right - self.left

    @property
    def height(self) -> float:
        return self.bottom - self.top

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return ((self.left + self.right) / 2.0, (self.top + self.bottom) / 2.0)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return tuple(self)


@dataclass(frozen=True)
class Detection:
    """One bounding-box observation in one camera and frame."""

    camera: int
    frame: int
    box: BoundingBox
    confidence: float
    feature: Optional[Feature] = None

    def __post_init__(self) -> None:
        if self.camera < 1:
            raise ValueError(f"camera must be >= 1, got {self.camera}")
        if self.frame < 0:
            raise ValueError(f"frame must be >= 0, got {self.frame}")
        self.box.validate()
        if not (math.isfinite(self.confidence) and 0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")
        # non-finite entries poison the sum, so one cheap check suffices
        if self.feature is not None and not math.isfinite(float(self.feature.sum())):
            raise ValueError("feature vector contains non-finite values")


class TrajectoryEntry(NamedTuple):
    """Per-frame state of a trajectory.

    Interpolated entries never carry an appearance feature; real entries may
    lack one too (e.g. trajectories parsed back from result files).
    """

    frame: int
    box: BoundingBox
    feature: Optional[Feature] = None
    interpolated: bool = False


@dataclass(frozen=True)
class Trajectory:
    """Frame-ordered single-camera track.

    Invariants: frames strictly increasing, at least one non-interpolated
    entry. Entries are immutable; lookup by frame is O(1).
    """

    camera: int
    entries: tuple[TrajectoryEntry, ...]

    def __post_init__(self) -> None:
        if not self.entries:
            raise ValueError("trajectory needs at least one entry")
        frames = [e.frame for e in self.entries]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ValueError("trajectory frames must be strictly increasing")
        if all(e.interpolated for e in self.entries):
            raise ValueError("trajectory needs at least one non-interpolated entry")
        if any(e.interpolated and e.feature is not None for e in self.entries):
            raise ValueError("interpolated entries cannot carry a feature")
        object.__setattr__(self, "_by_frame", {e.frame: e for e in self.entries})

    @property
    def first_frame(self) -> int:
        return self.entries[0].frame

    @property
    def last_frame(self) -> int:
        return self.entries[-1].frame

    def entry_at(self, frame: int) -> Optional[TrajectoryEntry]:
        return self._by_frame.get(frame)  # type: ignore[attr-defined]

    def frames(self) -> tuple[int, ...]:
        return tuple(e.frame for e in self.entries)


@dataclass(frozen=True)
class IdentityCluster:
    """Trajectories (possibly across cameras) attributed to one person."""

    identity: int
    members: tuple[Trajectory, ...]

    def __post_init__(self) -> None:
        if self.identity < 1:
            raise ValueError(f"identity label must be >= 1, got {self.identity}")
        if not self.members:
            raise ValueError("cluster needs at least one member trajectory")


def _normalize_pairs(pairs) -> frozenset[tuple[int, int]]:
    out = set()
    for a, b in pairs:
        out.add((min(int(a), int(b)), max(int(a), int(b))))
    return frozenset(out)


DEFAULT_OVERLAPPING_PAIRS = frozenset({(2, 8), (3, 5), (5, 7)})


@dataclass(frozen=True)
class PipelineConfig:
    """Every threshold and constant the pipeline needs.

    Appearance-scale values (s, sct_merge_threshold, mct_merge_threshold) are
    in feature-space units and must be chosen for the feature source at hand;
    the defaults suit unit-scale features.
    """

    s: float = 1.0
    iou_gate: float = 0.5
    window_frames: int = 60
    neighbor_frames: int = 10
    speed_threshold: float = 15.0
    overlap_iou_threshold: float = 0.5
    smoothing_window: int = 5
    rerank_k1: int = 20
    rerank_k2: int = 6
    rerank_lambda: float = 0.3
    mct_merge_threshold: float = 0.5
    max_gap_frames: int = 3600
    overlapping_camera_pairs: frozenset[tuple[int, int]] = DEFAULT_OVERLAPPING_PAIRS
    fps: int = 60
    detection_confidence_threshold: float = 0.9
    nms_iou_threshold: float = 0.3
    # Stop threshold for single-camera clustering; None means "same as s".
    sct_merge_threshold: Optional[float] = None
    normalize_features: bool = False

    def sct_stop_threshold(self) -> float:
        return self.s if self.sct_merge_threshold is None else self.sct_merge_threshold


def validate_config(config: PipelineConfig) -> list[str]:
    """Return a list of invariant violations; empty means the config is valid."""
    v: list[str] = []

    def _finite_positive(name: str) -> None:
        x = getattr(config, name)
        if not (isinstance(x, (int, float)) and math.isfinite(x) and x > 0):
            v.append(f"{name} must be finite and positive, got {x!r}")

    def _unit_interval(name: str) -> None:
        x = getattr(config, name)
        if not (isinstance(x, (int, float)) and math.isfinite(x) and 0.0 <= x <= 1.0):
            v.append(f"{name} must lie in [0, 1], got {x!r}")

    _finite_positive("s")
    _unit_interval("iou_gate")
    _unit_interval("overlap_iou_threshold")
    _unit_interval("nms_iou_threshold")
    _unit_interval("detection_confidence_threshold")
    _unit_interval("rerank_lambda")
    _finite_positive("speed_threshold")
    _finite_positive("mct_merge_threshold")

    for name in ("window_frames", "neighbor_frames", "rerank_k1", "rerank_k2",
                 "max_gap_frames", "fps"):
        x = getattr(config, name)
        if not (isinstance(x, int) and x >= 1):
            v.append(f"{name} must be a positive integer, got {x!r}")

    sw = config.smoothing_window
    if not (isinstance(sw, int) and sw >= 1 and sw % 2 == 1):
        v.append(f"smoothing_window must be a positive odd integer, got {sw!r}")

    if config.sct_merge_threshold is not None:
        x = config.sct_merge_threshold
        if not (isinstance(x, (int, float)) and math.isfinite(x) and x > 0):
            v.append(f"sct_merge_threshold must be finite and positive, got {x!r}")

    try:
        pairs = _normalize_pairs(config.overlapping_camera_pairs)
        for a, b in pairs:
            if a < 1 or a == b:
                v.append(f"overlapping_camera_pairs contains invalid pair ({a}, {b})")
    except (TypeError, ValueError):
        v.append("overlapping_camera_pairs must be a set of camera-id pairs")

    return v
