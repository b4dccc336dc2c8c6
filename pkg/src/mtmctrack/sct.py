"""Single-camera, near-online tracking.

Detections are linked frame-to-frame into tracklets inside a sliding window,
tracklets are merged with live trajectories by agglomerative clustering on a
three-part distance (appearance + temporal-separation gate + overlap gate),
and finished trajectories are gap-interpolated and smoothed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.spatial.distance import cdist

from .assignment import solve_max_weight_matching
from .geometry import gate, iou, iou_arrays, iou_grid
from .model import BoundingBox, Detection, PipelineConfig, Trajectory, TrajectoryEntry

# A tracklet is a trajectory whose entries sit on consecutive frames and all
# carry features; it is built by adjacent-frame linking below.
Tracklet = Trajectory

TrackLike = Union[Trajectory, Tracklet]


def pairwise_weight(a: Detection, b: Detection, config: PipelineConfig) -> float:
    """Linking weight of two detections on adjacent frames.

    -inf exactly when the IoU gate fails; otherwise the merge threshold minus
    the feature distance.
    """
    g = gate(iou(a.box, b.box), config.iou_gate)
    if math.isinf(g):
        return -math.inf
    return config.s - float(np.linalg.norm(a.feature - b.feature))


def _link_arrays(boxes_t: np.ndarray, feats_t: np.ndarray,
                 boxes_t1: np.ndarray, feats_t1: np.ndarray,
                 config: PipelineConfig) -> list[tuple[int, int]]:
    weights = config.s - cdist(feats_t, feats_t1)
    weights[iou_grid(boxes_t, boxes_t1) < config.iou_gate] = -math.inf
    return solve_max_weight_matching(weights)


def link_adjacent_frames(frame_t: Sequence[Detection], frame_t1: Sequence[Detection],
                         config: PipelineConfig) -> list[tuple[int, int]]:
    """Match detections of frame t against frame t+1.

    Returns index pairs into the two input lists; detections whose best
    linking weight is not positive stay unmatched.
    """
    if not frame_t or not frame_t1:
        return []
    return _link_arrays(
        np.asarray([d.box for d in frame_t]),
        np.stack([d.feature for d in frame_t]),
        np.asarray([d.box for d in frame_t1]),
        np.stack([d.feature for d in frame_t1]),
        config,
    )


def build_tracklets(window: Sequence[Detection], config: PipelineConfig) -> list[Tracklet]:
    """Chain adjacent-frame matches inside one window into tracklets.

    Detections that match nothing in either direction are discarded as false
    alarms; every retained detection lands in exactly one tracklet.
    """
    if not window:
        return []
    cameras = {d.camera for d in window}
    if len(cameras) != 1:
        raise ValueError("build_tracklets expects detections from one camera")
    camera = cameras.pop()
    for d in window:
        if d.feature is None:
            raise ValueError("tracklet building needs appearance features on every detection")

    by_frame: dict[int, list[Detection]] = {}
    for d in window:
        by_frame.setdefault(d.frame, []).append(d)
    arrays = {
        f: (np.asarray([d.box for d in dets]), np.stack([d.feature for d in dets]))
        for f, dets in by_frame.items()
    }

    succ: dict[tuple[int, int], tuple[int, int]] = {}
    has_pred: set[tuple[int, int]] = set()
    for f in sorted(by_frame):
        if f + 1 not in by_frame:
            continue
        boxes_t, feats_t = arrays[f]
        boxes_t1, feats_t1 = arrays[f + 1]
        for i, j in _link_arrays(boxes_t, feats_t, boxes_t1, feats_t1, config):
            succ[(f, i)] = (f + 1, j)
            has_pred.add((f + 1, j))

    tracklets: list[Tracklet] = []
    for f in sorted(by_frame):
        for i in range(len(by_frame[f])):
            if (f, i) in has_pred:
                continue
            chain = [(f, i)]
            while chain[-1] in succ:
                chain.append(succ[chain[-1]])
            if len(chain) < 2:
                continue
            entries = tuple(
                TrajectoryEntry(fr, by_frame[fr][idx].box, by_frame[fr][idx].feature, False)
                for fr, idx in chain
            )
            tracklets.append(Trajectory(camera, entries))
    return tracklets


class _Item:
    """Clustering wrapper around a trajectory with cached arrays."""

    __slots__ = ("traj", "first", "last", "contiguous", "frames", "boxes",
                 "feat_frames", "feats", "_avg_cache")

    def __init__(self, traj: TrackLike):
        self.traj = traj
        self.first = traj.first_frame
        self.last = traj.last_frame
        self.contiguous = self.last - self.first + 1 == len(traj.entries)
        self.frames = np.fromiter((e.frame for e in traj.entries), dtype=int,
                                  count=len(traj.entries))
        self.boxes = np.asarray([e.box for e in traj.entries])
        feat_frames = []
        feats = []
        for e in traj.entries:
            if not e.interpolated and e.feature is not None:
                feat_frames.append(e.frame)
                feats.append(e.feature)
        self.feat_frames = np.asarray(feat_frames, dtype=int)
        self.feats = np.stack(feats) if feats else None
        self._avg_cache: dict[tuple[int, int], np.ndarray] = {}

    def avg_feature_near(self, anchor: int, n: int) -> np.ndarray:
        if self.feats is None:
            raise ValueError("trajectory has no appearance features")
        key = (anchor, n)
        cached = self._avg_cache.get(key)
        if cached is None:
            if len(self.feat_frames) <= n:
                cached = self.feats.mean(axis=0)
            else:
                dist = np.abs(self.feat_frames - anchor)
                pick = np.lexsort((self.feat_frames, dist))[:n]
                cached = self.feats[pick].mean(axis=0)
            self._avg_cache[key] = cached
        return cached

    def box_at(self, frame: int) -> BoundingBox:
        return self.traj.entry_at(frame).box


def _as_item(x: Union[TrackLike, _Item]) -> _Item:
    return x if isinstance(x, _Item) else _Item(x)


def _endpoints(a: _Item, b: _Item) -> tuple[_Item, int, _Item, int]:
    """Pick the earlier-ending input and the matching endpoint frames.

    t_i is the last frame of the earlier-ending input; t_u is the first frame
    of the other input at or after t_i (it exists because the other input
    ends no earlier). Ties resolve by start frame, and a full tie is
    symmetric, so the result does not depend on argument order.
    """
    if (a.last, a.first) <= (b.last, b.first):
        ti_item, tj_item = a, b
    else:
        ti_item, tj_item = b, a
    t_i = ti_item.last
    pos = int(np.searchsorted(tj_item.frames, t_i))
    t_u = int(tj_item.frames[pos])
    return ti_item, t_i, tj_item, t_u


def _appearance(a: _Item, b: _Item, config: PipelineConfig) -> float:
    ti_item, t_i, tj_item, t_u = _endpoints(a, b)
    va = ti_item.avg_feature_near(t_i, config.neighbor_frames)
    vb = tj_item.avg_feature_near(t_u, config.neighbor_frames)
    return float(np.linalg.norm(va - vb))


def _separation(a: _Item, b: _Item, config: PipelineConfig) -> float:
    ti_item, t_i, tj_item, t_u = _endpoints(a, b)
    if t_u == t_i:
        return 0.0
    ax, ay = ti_item.box_at(t_i).center
    bx, by = tj_item.box_at(t_u).center
    speed = math.hypot(bx - ax, by - ay) / (t_u - t_i)
    return 0.0 if speed < config.speed_threshold else math.inf


def _overlap(a: _Item, b: _Item, config: PipelineConfig) -> float:
    if a.last < b.first or b.last < a.first:
        return 0.0
    if a.contiguous and b.contiguous:
        lo = max(a.first, b.first)
        hi = min(a.last, b.last)
        boxes_a = a.boxes[lo - a.first:hi - a.first + 1]
        boxes_b = b.boxes[lo - b.first:hi - b.first + 1]
    else:
        # sorted-merge intersection of the frame arrays
        pos = np.searchsorted(a.frames, b.frames)
        pos[pos == len(a.frames)] = 0
        hit = a.frames[pos] == b.frames
        if not hit.any():
            return 0.0
        boxes_a = a.boxes[pos[hit]]
        boxes_b = b.boxes[hit]
    avg = float(iou_arrays(boxes_a, boxes_b).mean())
    return 0.0 if avg >= config.overlap_iou_threshold else math.inf


def appearance_distance(a: TrackLike, b: TrackLike, config: PipelineConfig) -> float:
    """L2 distance between endpoint-neighborhood feature averages."""
    return _appearance(_as_item(a), _as_item(b), config)


def separation_distance(a: TrackLike, b: TrackLike, config: PipelineConfig) -> float:
    """0 when the endpoint-to-endpoint speed is plausible, +inf otherwise."""
    return _separation(_as_item(a), _as_item(b), config)


def overlap_distance(a: TrackLike, b: TrackLike, config: PipelineConfig) -> float:
    """0 when co-occurring frames overlap well enough (or not at all), else +inf."""
    return _overlap(_as_item(a), _as_item(b), config)


@dataclass(frozen=True)
class SctDistance:
    """The three distance parts between two tracks."""

    appearance: float
    separation: float
    overlap: float

    @property
    def total(self) -> float:
        return self.appearance + self.separation + self.overlap


def sct_distance_parts(a: TrackLike, b: TrackLike, config: PipelineConfig) -> SctDistance:
    ia, ib = _as_item(a), _as_item(b)
    return SctDistance(
        appearance=_appearance(ia, ib, config),
        separation=_separation(ia, ib, config),
        overlap=_overlap(ia, ib, config),
    )


def sct_distance(a: TrackLike, b: TrackLike, config: PipelineConfig) -> float:
    """Sum of appearance, separation, and overlap parts."""
    return sct_distance_parts(a, b, config).total


def _pair_distance(a: _Item, b: _Item, config: PipelineConfig) -> float:
    # Gates are cheap; appearance only matters when both pass.
    if _separation(a, b, config) == math.inf:
        return math.inf
    if _overlap(a, b, config) == math.inf:
        return math.inf
    return _appearance(a, b, config)


def _merge_items(a: _Item, b: _Item) -> _Item:
    # On frame collisions the earlier-starting member wins; ties keep the
    # lower-index member (a).
    winner, loser = (a, b) if a.first <= b.first else (b, a)
    by_frame = {e.frame: e for e in loser.traj.entries}
    by_frame.update((e.frame, e) for e in winner.traj.entries)
    entries = tuple(by_frame[f] for f in sorted(by_frame))
    return _Item(Trajectory(a.traj.camera, entries))


def _cluster_core(items: list[_Item], dist: np.ndarray,
                  config: PipelineConfig) -> tuple[list[_Item], np.ndarray]:
    """Agglomerative loop over a precomputed upper-triangular distance matrix."""
    threshold = config.sct_stop_threshold()
    while len(items) > 1:
        flat = int(np.argmin(dist))
        i, j = divmod(flat, dist.shape[1])
        if not dist[i, j] <= threshold:
            break
        items[i] = _merge_items(items[i], items[j])
        del items[j]
        dist = np.delete(np.delete(dist, j, axis=0), j, axis=1)
        for k in range(len(items)):
            if k == i:
                continue
            a, b = (i, k) if i < k else (k, i)
            dist[a, b] = _pair_distance(items[a], items[b], config)
    return items, dist


def _fresh_matrix(items: list[_Item], config: PipelineConfig,
                  carry: Optional[np.ndarray] = None, n_old: int = 0) -> np.ndarray:
    n = len(items)
    dist = np.full((n, n), math.inf)
    if carry is not None and n_old:
        dist[:n_old, :n_old] = carry
    for i in range(n):
        for j in range(max(i + 1, n_old), n):
            dist[i, j] = _pair_distance(items[i], items[j], config)
    return dist


def cluster_tracklets(items: Sequence[TrackLike], config: PipelineConfig) -> list[Trajectory]:
    """Merge tracklets/trajectories until the minimum distance exceeds the
    stop threshold; ties pick the smallest index pair."""
    wrapped = [_as_item(t) for t in items]
    if len(wrapped) <= 1:
        return [it.traj for it in wrapped]
    wrapped, _ = _cluster_core(wrapped, _fresh_matrix(wrapped, config), config)
    return [it.traj for it in wrapped]


def interpolate_and_smooth(t: Trajectory, config: PipelineConfig) -> Trajectory:
    """Fill frame gaps by linear interpolation, then moving-average the boxes.

    Interpolated entries carry no feature; smoothing is an unweighted mean
    over a centered window, truncated at the ends.
    """
    have = np.fromiter((e.frame for e in t.entries), dtype=float, count=len(t.entries))
    boxes = np.asarray([e.box for e in t.entries])
    frames = np.arange(t.first_frame, t.last_frame + 1)
    filled = np.empty((len(frames), 4))
    for k in range(4):
        filled[:, k] = np.interp(frames, have, boxes[:, k])

    w = config.smoothing_window
    if w > 1 and len(frames) > 1:
        half = (w - 1) // 2
        idx = np.arange(len(frames))
        lo = np.maximum(0, idx - half)
        hi = np.minimum(len(frames) - 1, idx + half)
        csum = np.vstack([np.zeros(4), np.cumsum(filled, axis=0)])
        filled = (csum[hi + 1] - csum[lo]) / (hi + 1 - lo)[:, None]

    originals = {e.frame: e for e in t.entries}
    entries = []
    for frame, row in zip(frames.tolist(), filled.tolist()):
        box = BoundingBox(*row)
        orig = originals.get(frame)
        if orig is None:
            entries.append(TrajectoryEntry(frame, box, None, True))
        else:
            entries.append(TrajectoryEntry(frame, box, orig.feature, orig.interpolated))
    return Trajectory(t.camera, tuple(entries))


def track_camera(detections: Sequence[Detection], config: PipelineConfig) -> list[Trajectory]:
    """Run the near-online tracker over all detections of one camera.

    Slides a window over the frame axis, builds tracklets per window, and
    clusters them with the live trajectories carried over from previous
    windows. Live trajectories never retire. The final trajectories are
    interpolated and smoothed.
    """
    if not detections:
        return []
    cameras = {d.camera for d in detections}
    if len(cameras) != 1:
        raise ValueError("track_camera expects detections from one camera")

    by_frame: dict[int, list[Detection]] = {}
    for d in detections:
        by_frame.setdefault(d.frame, []).append(d)
    frames = sorted(by_frame)
    lo, hi = frames[0], frames[-1]

    live: list[_Item] = []
    dist = np.full((0, 0), math.inf)
    for start in range(lo, hi + 1, config.window_frames):
        window: list[Detection] = []
        for f in range(start, min(start + config.window_frames, hi + 1)):
            if f in by_frame:
                window.extend(by_frame[f])
        if not window:
            continue
        new_items = [_Item(t) for t in build_tracklets(window, config)]
        if not new_items:
            continue
        n_old = len(live)
        live = live + new_items
        live, dist = _cluster_core(live, _fresh_matrix(live, config, dist, n_old), config)

    done = [interpolate_and_smooth(it.traj, config) for it in live]
    done.sort(key=lambda t: (t.first_frame, t.last_frame, tuple(t.entries[0].box)))
    return done
