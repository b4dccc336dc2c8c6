"""Identity-level evaluation: IDF1, IDP, IDR.

True and computed identities are matched globally by a min-cost bipartite
assignment over per-frame disagreement counts; a frame where both identities
have a box that fails the IoU test counts against both sides (one missed
truth frame plus one false hypothesis frame). Each side is augmented with
dummy counterparts so any identity may stay unmatched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import iou, iou_arrays
from .model import BoundingBox, IdentityCluster

IOU_MATCH_THRESHOLD = 0.5


def frame_match(gt_box: BoundingBox, hyp_box: BoundingBox) -> bool:
    """Per-frame truth-to-hypothesis correspondence test (inclusive at 0.5)."""
    return iou(gt_box, hyp_box) >= IOU_MATCH_THRESHOLD


@dataclass(frozen=True)
class IdMetricsReport:
    idtp: int
    idfp: int
    idfn: int
    idf1: float
    idp: float
    idr: float


def _ratio(num: int, den: int) -> float:
    return num / den if den > 0 else 0.0


def make_report(idtp: int, idfp: int, idfn: int) -> IdMetricsReport:
    return IdMetricsReport(
        idtp=idtp,
        idfp=idfp,
        idfn=idfn,
        idf1=_ratio(2 * idtp, 2 * idtp + idfp + idfn),
        idp=_ratio(idtp, idtp + idfp),
        idr=_ratio(idtp, idtp + idfn),
    )


class _IdentityCoverage:
    """(camera, frame) -> box row index, with boxes in one array."""

    def __init__(self, cluster: IdentityCluster, side: str):
        slots: dict[tuple[int, int], int] = {}
        boxes: list[tuple[float, float, float, float]] = []
        for t in cluster.members:
            for e in t.entries:
                key = (t.camera, e.frame)
                if key in slots:
                    raise ValueError(
                        f"{side} identity {cluster.identity} has two boxes in "
                        f"camera {t.camera}, frame {e.frame}"
                    )
                slots[key] = len(boxes)
                boxes.append(tuple(e.box))
        self.slots = slots
        self.boxes = np.asarray(boxes)

    def __len__(self) -> int:
        return len(self.slots)


def _agreement(a: _IdentityCoverage, b: _IdentityCoverage) -> int:
    """Count of co-covered (camera, frame) slots passing the IoU test."""
    common = a.slots.keys() & b.slots.keys()
    if not common:
        return 0
    ia = np.fromiter((a.slots[k] for k in common), dtype=int, count=len(common))
    ib = np.fromiter((b.slots[k] for k in common), dtype=int, count=len(common))
    return int(np.count_nonzero(iou_arrays(a.boxes[ia], b.boxes[ib]) >= IOU_MATCH_THRESHOLD))


def _coverages(clusters: list[IdentityCluster], side: str) -> list[_IdentityCoverage]:
    seen: set[int] = set()
    out = []
    for cluster in clusters:
        if cluster.identity in seen:
            raise ValueError(f"duplicate identity label {cluster.identity} on {side} side")
        seen.add(cluster.identity)
        out.append(_IdentityCoverage(cluster, side))
    return out


def id_measures(ground_truth: list[IdentityCluster],
                hypothesis: list[IdentityCluster]) -> IdMetricsReport:
    """Compute the identity measures between two sets of identity clusters."""
    gt = _coverages(ground_truth, "ground-truth")
    hyp = _coverages(hypothesis, "hypothesis")
    total_gt = sum(len(g) for g in gt)
    total_hyp = sum(len(h) for h in hyp)
    n_gt, n_hyp = len(gt), len(hyp)

    if n_gt == 0 or n_hyp == 0:
        return make_report(0, total_hyp, total_gt)

    agree = np.zeros((n_gt, n_hyp), dtype=int)
    for i, g in enumerate(gt):
        for j, h in enumerate(hyp):
            agree[i, j] = _agreement(g, h)

    inf_cost = total_gt + total_hyp + 1
    size = n_gt + n_hyp
    cost = np.full((size, size), inf_cost, dtype=float)
    for i, g in enumerate(gt):
        for j, h in enumerate(hyp):
            cost[i, j] = len(g) + len(h) - 2 * agree[i, j]
        cost[i, n_hyp + i] = len(g)        # stay unmatched: every frame missed
    for j, h in enumerate(hyp):
        cost[n_gt + j, j] = len(h)         # stay unmatched: every frame false
    cost[n_gt:, n_hyp:] = 0.0

    rows, cols = linear_sum_assignment(cost)
    idtp = 0
    for r, c in zip(rows, cols):
        if r < n_gt and c < n_hyp:
            idtp += int(agree[r, c])
    return make_report(idtp, total_hyp - idtp, total_gt - idtp)
