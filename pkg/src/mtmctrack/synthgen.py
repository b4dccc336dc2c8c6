"""Deterministic synthetic multi-camera scenario generator.

Identities follow piecewise-linear walks inside cameras and move between
cameras along a transition graph; visits to a camera with an overlapping
partner are mirrored into the partner so the co-occurrence exemption gets
exercised. The renderer turns ground truth into noisy detections with
identity-clustered feature vectors plus false alarms. Everything is a pure
function of (configs, seed); generation draws sequentially by identity so
outputs are byte-stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import (
    BoundingBox,
    Detection,
    IdentityCluster,
    Trajectory,
    TrajectoryEntry,
    _normalize_pairs,
)

# Shortest camera visit worth emitting; single-frame stubs cannot be tracked.
_MIN_VISIT_FRAMES = 2


def fully_connected_transitions(n_cameras: int, lo: int, hi: int) -> dict:
    """Travel-time range (lo, hi) between every ordered camera pair."""
    out = {}
    for a in range(1, n_cameras + 1):
        for b in range(1, n_cameras + 1):
            if a != b:
                out[(a, b)] = (lo, hi)
    return out


@dataclass(frozen=True)
class WorldConfig:
    """Scenario layout: cameras, identities, motion, and timing."""

    seed: int = 0
    n_identities: int = 5
    n_cameras: int = 2
    overlapping_camera_pairs: frozenset = frozenset()
    fps: int = 60
    duration_s: float = 30.0
    walk_speed: tuple[float, float] = (1.0, 4.0)
    transitions: dict = field(default_factory=dict)
    box_width: tuple[float, float] = (30.0, 50.0)
    box_height: tuple[float, float] = (80.0, 120.0)
    image_size: tuple[float, float] = (1920.0, 1080.0)
    visit_frames: tuple[int, int] = (300, 900)


@dataclass(frozen=True)
class NoiseConfig:
    """Detection and feature corruption model."""

    jitter_sigma: float = 1.0
    miss_rate: float = 0.05
    false_alarm_rate: float = 0.05
    feature_dim: int = 8
    embedding_separation: float = 2.0
    feature_sigma: float = 0.5


def validate_world_config(wc: WorldConfig) -> list[str]:
    v: list[str] = []
    if wc.n_identities < 1:
        v.append(f"n_identities must be >= 1, got {wc.n_identities}")
    if wc.n_cameras < 1:
        v.append(f"n_cameras must be >= 1, got {wc.n_cameras}")
    if wc.fps < 1:
        v.append(f"fps must be >= 1, got {wc.fps}")
    if not (math.isfinite(wc.duration_s) and wc.duration_s > 0):
        v.append(f"duration_s must be positive, got {wc.duration_s}")
    for name in ("walk_speed", "box_width", "box_height", "visit_frames"):
        lo, hi = getattr(wc, name)
        if not (0 <= lo <= hi):
            v.append(f"{name} range must satisfy 0 <= lo <= hi, got ({lo}, {hi})")
    if wc.visit_frames[0] < _MIN_VISIT_FRAMES:
        v.append(f"visit_frames lower bound must be >= {_MIN_VISIT_FRAMES}")
    if wc.image_size[0] <= wc.box_width[1] or wc.image_size[1] <= wc.box_height[1]:
        v.append("image_size must exceed the largest box size")
    try:
        pairs = _normalize_pairs(wc.overlapping_camera_pairs)
    except (TypeError, ValueError):
        v.append("overlapping_camera_pairs must be camera-id pairs")
        pairs = frozenset()
    for a, b in pairs:
        if not (1 <= a <= wc.n_cameras and 1 <= b <= wc.n_cameras):
            v.append(f"overlap pair ({a}, {b}) references an unknown camera")
    if wc.n_cameras > 1 and not wc.transitions:
        v.append("multi-camera world needs a transition graph (no path between cameras)")
    for (a, b), (lo, hi) in wc.transitions.items():
        if not (1 <= a <= wc.n_cameras and 1 <= b <= wc.n_cameras) or a == b:
            v.append(f"transition ({a}, {b}) references an invalid camera pair")
        if not (0 <= lo <= hi):
            v.append(f"transition ({a}, {b}) travel range must satisfy 0 <= lo <= hi")
        elif lo < 1 and (min(a, b), max(a, b)) not in pairs:
            v.append(f"transition ({a}, {b}) between non-overlapping cameras must take > 0 frames")
    return v


def validate_noise_config(nc: NoiseConfig) -> list[str]:
    v: list[str] = []
    if not (math.isfinite(nc.jitter_sigma) and nc.jitter_sigma >= 0):
        v.append(f"jitter_sigma must be >= 0, got {nc.jitter_sigma}")
    if not (0.0 <= nc.miss_rate <= 1.0):
        v.append(f"miss_rate must lie in [0, 1], got {nc.miss_rate}")
    if not (math.isfinite(nc.false_alarm_rate) and nc.false_alarm_rate >= 0):
        v.append(f"false_alarm_rate must be >= 0, got {nc.false_alarm_rate}")
    if nc.feature_dim < 1:
        v.append(f"feature_dim must be >= 1, got {nc.feature_dim}")
    if not (math.isfinite(nc.embedding_separation) and nc.embedding_separation > 0):
        v.append(f"embedding_separation must be positive, got {nc.embedding_separation}")
    if not (math.isfinite(nc.feature_sigma) and nc.feature_sigma >= 0):
        v.append(f"feature_sigma must be >= 0, got {nc.feature_sigma}")
    return v


def _reflect(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Fold values into [lo, hi] by mirroring at the bounds."""
    span = hi - lo
    if span <= 0:
        return np.full_like(values, lo)
    period = 2.0 * span
    folded = np.mod(values - lo, period)
    return lo + np.minimum(folded, period - folded)


def _walk(rng: np.random.Generator, n: int, x_range, y_range, speed_range) -> np.ndarray:
    """Piecewise-linear walk of n box centers inside the given ranges.

    Walkers bounce off the bounds rather than sticking to them, so two
    identities do not pile up in corners.
    """
    pos = np.array([rng.uniform(*x_range), rng.uniform(*y_range)])
    out = np.empty((n, 2))
    i = 0
    while i < n:
        seg = min(int(rng.integers(20, 61)), n - i)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        speed = rng.uniform(*speed_range)
        step = speed * np.array([np.cos(angle), np.sin(angle)])
        raw = pos + step * np.arange(1, seg + 1)[:, None]
        out[i:i + seg, 0] = _reflect(raw[:, 0], *x_range)
        out[i:i + seg, 1] = _reflect(raw[:, 1], *y_range)
        pos = out[i + seg - 1].copy()
        i += seg
    return out


def _visit_trajectory(camera: int, start: int, centers: np.ndarray,
                      w: float, h: float, offset=(0.0, 0.0)) -> Trajectory:
    entries = []
    for k in range(len(centers)):
        cx = centers[k, 0] + offset[0]
        cy = centers[k, 1] + offset[1]
        box = BoundingBox(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
        entries.append(TrajectoryEntry(start + k, box, None, False))
    return Trajectory(camera, tuple(entries))


def generate_world(wc: WorldConfig) -> list[IdentityCluster]:
    """Build ground-truth identity clusters, deterministic in wc.seed."""
    violations = validate_world_config(wc)
    if violations:
        raise ValueError("; ".join(violations))

    rng = np.random.default_rng(wc.seed)
    total = int(round(wc.fps * wc.duration_s))
    pairs = _normalize_pairs(wc.overlapping_camera_pairs)

    partners: dict[int, list[int]] = {}
    for a, b in sorted(pairs):
        partners.setdefault(a, []).append(b)
        partners.setdefault(b, []).append(a)
    for cam in partners:
        partners[cam].sort()

    mirror_offset: dict[tuple[int, int], np.ndarray] = {}
    for a, b in sorted(pairs):
        off = rng.uniform(-60.0, 60.0, size=2)
        mirror_offset[(a, b)] = off
        mirror_offset[(b, a)] = -off

    out_edges: dict[int, list[tuple[int, tuple[int, int]]]] = {}
    for (a, b), rng_t in sorted(wc.transitions.items()):
        out_edges.setdefault(a, []).append((b, rng_t))

    clusters = []
    for ident in range(1, wc.n_identities + 1):
        members: list[Trajectory] = []
        camera = int(rng.integers(1, wc.n_cameras + 1))
        w = rng.uniform(*wc.box_width)
        h = rng.uniform(*wc.box_height)
        x_range = (w / 2.0, wc.image_size[0] - w / 2.0)
        y_range = (h / 2.0, wc.image_size[1] - h / 2.0)
        t = int(rng.integers(0, max(2, wc.fps // 2)))
        visited = {camera} | set(partners.get(camera, []))
        while t < total:
            edges = out_edges.get(camera, [])
            visit = int(rng.integers(wc.visit_frames[0], wc.visit_frames[1] + 1))
            if not edges:
                visit = total - t
            visit = min(visit, total - t)
            if visit >= _MIN_VISIT_FRAMES:
                centers = _walk(rng, visit, x_range, y_range, wc.walk_speed)
                members.append(_visit_trajectory(camera, t, centers, w, h))
                for p in partners.get(camera, []):
                    off = mirror_offset[(camera, p)]
                    members.append(_visit_trajectory(p, t, centers, w, h, off))
            if not edges:
                break
            # Only move to cameras not seen yet: a return visit would later
            # be bridged by interpolation into a track that shadows the time
            # spent elsewhere, which no tracker can untangle. Identities
            # leave the world once they run out of fresh cameras.
            fresh = [e for e in edges if e[0] not in visited]
            if not fresh:
                break
            dst, (lo_t, hi_t) = fresh[int(rng.integers(0, len(fresh)))]
            travel = int(rng.integers(lo_t, hi_t + 1))
            # Next visit starts `travel` frames after the exit frame.
            t = t + visit - 1 + max(travel, 0 if (min(camera, dst), max(camera, dst)) in pairs else 1)
            camera = dst
            visited |= {camera} | set(partners.get(camera, []))
        if members:
            clusters.append(IdentityCluster(ident, tuple(members)))
    return clusters


def identity_embeddings(n: int, dim: int, separation: float,
                        rng: np.random.Generator) -> np.ndarray:
    """Points whose minimum pairwise distance is exactly `separation`.

    Uses a scaled orthogonal construction when the dimension allows, else
    random points rescaled to the target minimum distance.
    """
    if dim >= n or n == 1:
        emb = np.zeros((n, dim))
        emb[np.arange(n), np.arange(n)] = separation / math.sqrt(2.0)
        return emb
    pts = rng.uniform(0.0, 1.0, (n, dim))
    dmin = min(
        float(np.linalg.norm(pts[i] - pts[j]))
        for i in range(n) for j in range(i + 1, n)
    )
    return pts * (separation / dmin)


def render_detections(gt: list[IdentityCluster], nc: NoiseConfig,
                      seed: int) -> tuple[list[Detection], list[Optional[int]]]:
    """Corrupt ground truth into detections plus a detection->identity map.

    Returned lists are index-aligned; false alarms carry label None. Output
    is sorted by (camera, frame) and deterministic in the seed.
    """
    violations = validate_noise_config(nc)
    if violations:
        raise ValueError("; ".join(violations))

    rng = np.random.default_rng(seed)
    idents = sorted(c.identity for c in gt)
    emb = identity_embeddings(len(idents), nc.feature_dim, nc.embedding_separation, rng)
    emb_of = {ident: emb[k] for k, ident in enumerate(idents)}

    detections: list[Detection] = []
    labels: list[Optional[int]] = []
    n_ids = max(len(idents), 1)
    for cluster in sorted(gt, key=lambda c: c.identity):
        # Constant per-identity confidence: when two people overlap, NMS then
        # suppresses the same one every frame, so occlusion gaps stay
        # contiguous instead of interleaving.
        rank = idents.index(cluster.identity)
        confidence = 0.92 + 0.07 * (rank + 1) / n_ids
        for traj in cluster.members:
            n = len(traj.entries)
            missed = rng.uniform(size=n) < nc.miss_rate
            jitter = rng.normal(0.0, nc.jitter_sigma, (n, 2))
            noise = rng.normal(0.0, nc.feature_sigma, (n, nc.feature_dim))
            base = emb_of[cluster.identity]
            for k, e in enumerate(traj.entries):
                if missed[k]:
                    continue
                dx, dy = jitter[k]
                box = BoundingBox(e.box.left + dx, e.box.top + dy,
                                  e.box.right + dx, e.box.bottom + dy)
                detections.append(Detection(traj.camera, e.frame, box,
                                            confidence, base + noise[k]))
                labels.append(cluster.identity)

    if nc.false_alarm_rate > 0 and gt:
        boxes = [e.box for c in gt for t in c.members for e in t.entries]
        env_l = min(b.left for b in boxes)
        env_t = min(b.top for b in boxes)
        env_r = max(b.right for b in boxes)
        env_b = max(b.bottom for b in boxes)
        cams = sorted({t.camera for c in gt for t in c.members})
        f_lo = min(t.first_frame for c in gt for t in c.members)
        f_hi = max(t.last_frame for c in gt for t in c.members)
        far = 10.0 * (float(np.linalg.norm(emb, axis=1).max()) + nc.embedding_separation + 1.0)
        for cam in cams:
            counts = rng.poisson(nc.false_alarm_rate, f_hi - f_lo + 1)
            for fi, k in enumerate(counts):
                for _ in range(int(k)):
                    cx = rng.uniform(env_l, env_r)
                    cy = rng.uniform(env_t, env_b)
                    w = rng.uniform(20.0, 60.0)
                    h = rng.uniform(50.0, 140.0)
                    direction = rng.normal(0.0, 1.0, nc.feature_dim)
                    norm = float(np.linalg.norm(direction))
                    feature = direction * (far / norm) if norm > 0 else np.full(nc.feature_dim, far)
                    box = BoundingBox(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
                    detections.append(Detection(cam, f_lo + fi, box,
                                                float(rng.uniform(0.9, 1.0)), feature))
                    labels.append(None)

    order = sorted(range(len(detections)), key=lambda k: (detections[k].camera, detections[k].frame))
    return [detections[k] for k in order], [labels[k] for k in order]
