"""Cross-camera association.

Each finished trajectory is summarized by its mean appearance feature, the
pairwise Euclidean matrix is refined by k-reciprocal re-ranking, and
trajectories are then merged greedily from the smallest distance up, without
recomputing distances, under temporal-gap and co-occurrence constraints.
In-camera pairs participate like any other pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .model import IdentityCluster, PipelineConfig, Trajectory, _normalize_pairs


def mean_feature(t: Trajectory) -> np.ndarray:
    """Componentwise mean over the non-interpolated features of a trajectory."""
    feats = [e.feature for e in t.entries if not e.interpolated and e.feature is not None]
    if not feats:
        raise ValueError("trajectory has no appearance features")
    return np.stack(feats).mean(axis=0)


@dataclass(frozen=True)
class TrajectoryDescriptor:
    """Per-trajectory summary used for cross-camera distances."""

    trajectory: Trajectory
    mean_feature: np.ndarray
    camera: int
    first_frame: int
    last_frame: int


def describe(t: Trajectory) -> TrajectoryDescriptor:
    return TrajectoryDescriptor(
        trajectory=t,
        mean_feature=mean_feature(t),
        camera=t.camera,
        first_frame=t.first_frame,
        last_frame=t.last_frame,
    )


def euclidean_matrix(descs: Sequence[TrajectoryDescriptor]) -> np.ndarray:
    """Symmetric zero-diagonal matrix of mean-feature Euclidean distances."""
    feats = np.stack([d.mean_feature for d in descs])
    dist = cdist(feats, feats)
    dist = (dist + dist.T) / 2.0
    np.fill_diagonal(dist, 0.0)
    return dist


def _reciprocal_sets(rank: np.ndarray, k: int) -> list[np.ndarray]:
    """k-reciprocal neighbor set of every item (self always included)."""
    n = rank.shape[0]
    member = np.zeros((n, n), dtype=bool)
    for i in range(n):
        member[i, rank[i, :k + 1]] = True
    out = []
    for i in range(n):
        forward = rank[i, :k + 1]
        out.append(forward[member[forward, i]])
    return out


def k_reciprocal_rerank(d: np.ndarray, k1: int, k2: int, lam: float) -> np.ndarray:
    """Refine a distance matrix with k-reciprocal encoding.

    Steps: reciprocal neighbor sets expanded by half-k sets with >= 2/3
    overlap, Gaussian-of-distance sparse encodings, local query expansion
    over the k2 nearest neighbors, Jaccard distance between encodings, and a
    lam * d + (1 - lam) * jaccard blend, symmetrized with zero diagonal.
    """
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError("distance matrix must be square")
    if (d < 0).any():
        raise ValueError("distance matrix must be non-negative")
    n = d.shape[0]
    if n == 1:
        return np.zeros((1, 1))
    k1 = max(1, min(k1, n - 1))
    k2 = max(1, min(k2, n - 1))

    # Ranking ties break by index; the item itself always ranks first.
    ranked = d.copy()
    np.fill_diagonal(ranked, -1.0)
    rank = np.argsort(ranked, axis=1, kind="stable")

    r_k1 = _reciprocal_sets(rank, k1)
    r_half = _reciprocal_sets(rank, int(np.around(k1 / 2.0)))

    encodings = np.zeros((n, n))
    for i in range(n):
        expanded = r_k1[i]
        for q in r_k1[i]:
            candidate = r_half[q]
            if np.intersect1d(candidate, r_k1[i]).size >= (2.0 / 3.0) * candidate.size:
                expanded = np.append(expanded, candidate)
        expanded = np.unique(expanded)
        weights = np.exp(-d[i, expanded])
        encodings[i, expanded] = weights / weights.sum()

    if k2 > 1:
        encodings = np.stack([encodings[rank[i, :k2]].mean(axis=0) for i in range(n)])

    jaccard = np.zeros((n, n))
    for i in range(n):
        mins = np.minimum(encodings[i], encodings).sum(axis=1)
        maxs = np.maximum(encodings[i], encodings).sum(axis=1)
        jaccard[i] = 1.0 - mins / maxs

    final = lam * d + (1.0 - lam) * jaccard
    final = (final + final.T) / 2.0
    np.fill_diagonal(final, 0.0)
    return final


def _ranges_overlap(a: Trajectory, b: Trajectory) -> bool:
    return a.first_frame <= b.last_frame and b.first_frame <= a.last_frame


def _gap_frames(a: Trajectory, b: Trajectory) -> int:
    """Temporal separation in frames; 0 when the ranges overlap."""
    if _ranges_overlap(a, b):
        return 0
    if a.last_frame < b.first_frame:
        return b.first_frame - a.last_frame
    return a.first_frame - b.last_frame


def _union_co_occurrence_ok(members: Sequence[Trajectory],
                            pairs: frozenset[tuple[int, int]]) -> bool:
    for i, x in enumerate(members):
        for y in members[i + 1:]:
            if not _ranges_overlap(x, y):
                continue
            if x.camera == y.camera:
                return False
            key = (min(x.camera, y.camera), max(x.camera, y.camera))
            if key not in pairs:
                return False
    return True


def compatible(cluster_a: IdentityCluster, cluster_b: IdentityCluster,
               config: PipelineConfig,
               trigger: Optional[tuple[Trajectory, Trajectory]] = None) -> bool:
    """Whether two clusters may merge.

    The gap rule applies to the trajectory pair whose distance triggered the
    merge test (the temporally closest cross pair when none is given); the
    co-occurrence rule applies to every pair in the union of members.
    """
    if trigger is None:
        trigger = min(
            ((x, y) for x in cluster_a.members for y in cluster_b.members),
            key=lambda p: _gap_frames(p[0], p[1]),
        )
    if _gap_frames(trigger[0], trigger[1]) >= config.max_gap_frames:
        return False
    pairs = _normalize_pairs(config.overlapping_camera_pairs)
    return _union_co_occurrence_ok(list(cluster_a.members) + list(cluster_b.members), pairs)


def merge_trajectories(trajs: Sequence[Trajectory], config: PipelineConfig,
                       audit: Optional[list] = None) -> list[IdentityCluster]:
    """Greedy constrained merging of trajectories into identity clusters.

    Pairs are processed by ascending re-ranked distance (ties by index) until
    the merge threshold; distances are never updated after merges. When
    `audit` is given, every performed union is appended to it as
    (index_a, index_b, distance, gap_frames).
    """
    trajs = list(trajs)
    n = len(trajs)
    if n == 0:
        return []

    descs = [describe(t) for t in trajs]
    if n == 1:
        refined = np.zeros((1, 1))
    else:
        refined = k_reciprocal_rerank(
            euclidean_matrix(descs), config.rerank_k1, config.rerank_k2,
            config.rerank_lambda,
        )

    order = sorted(
        (float(refined[i, j]), i, j) for i in range(n) for j in range(i + 1, n)
    )

    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    members: dict[int, list[int]] = {i: [i] for i in range(n)}
    pairs = _normalize_pairs(config.overlapping_camera_pairs)

    for dist, i, j in order:
        if dist >= config.mct_merge_threshold:
            break
        ri, rj = find(i), find(j)
        if ri == rj:
            continue
        gap = _gap_frames(trajs[i], trajs[j])
        if gap >= config.max_gap_frames:
            continue
        union = [trajs[k] for k in members[ri]] + [trajs[k] for k in members[rj]]
        if not _union_co_occurrence_ok(union, pairs):
            continue
        lo, hi = (ri, rj) if ri < rj else (rj, ri)
        parent[hi] = lo
        members[lo].extend(members.pop(hi))
        if audit is not None:
            audit.append((i, j, dist, gap))

    groups = sorted(
        members.values(),
        key=lambda idxs: (
            min(trajs[k].first_frame for k in idxs),
            min(trajs[k].camera for k in idxs),
            min(idxs),
        ),
    )
    clusters = []
    for label, idxs in enumerate(groups, start=1):
        ordered = sorted(idxs, key=lambda k: (trajs[k].first_frame, trajs[k].camera, k))
        clusters.append(IdentityCluster(label, tuple(trajs[k] for k in ordered)))
    return clusters
