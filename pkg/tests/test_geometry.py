import math

import numpy as np
import pytest

from mtmctrack.geometry import confidence_filter, gate, iou, nms
from mtmctrack.model import BoundingBox, Detection


def box(l, t, r, b):
    return BoundingBox(float(l), float(t), float(r), float(b))


def det(conf, b, camera=1, frame=0):
    return Detection(camera, frame, b, conf)


class TestIou:
    def test_identical_boxes(self):
        assert iou(box(0, 0, 10, 10), box(0, 0, 10, 10)) == 1.0

    def test_disjoint(self):
        assert iou(box(0, 0, 10, 10), box(20, 20, 30, 30)) == 0.0

    def test_half_shift(self):
        # intersection 50, union 150
        assert iou(box(0, 0, 10, 10), box(5, 0, 15, 10)) == pytest.approx(1 / 3, abs=0)

    def test_touching_edges_count_as_disjoint(self):
        assert iou(box(0, 0, 10, 10), box(10, 0, 20, 10)) == 0.0

    def test_symmetric_random(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            l1, t1, l2, t2 = rng.uniform(0, 100, 4)
            a = box(l1, t1, l1 + rng.uniform(1, 50), t1 + rng.uniform(1, 50))
            b = box(l2, t2, l2 + rng.uniform(1, 50), t2 + rng.uniform(1, 50))
            assert iou(a, b) == iou(b, a)
            assert 0.0 <= iou(a, b) <= 1.0

    def test_self_iou_is_one(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            l, t = rng.uniform(0, 100, 2)
            a = box(l, t, l + rng.uniform(0.1, 50), t + rng.uniform(0.1, 50))
            assert iou(a, a) == 1.0


class TestGate:
    def test_below_threshold(self):
        assert gate(0.4, 0.5) == math.inf

    def test_at_threshold_inclusive(self):
        assert gate(0.5, 0.5) == 0.0

    def test_above_threshold(self):
        assert gate(0.9, 0.5) == 0.0


class TestConfidenceFilter:
    def test_keeps_at_or_above(self):
        ds = [det(0.95, box(0, 0, 1, 1)), det(0.89, box(0, 0, 1, 1))]
        assert confidence_filter(ds, 0.9) == [ds[0]]

    def test_zero_threshold_keeps_all(self):
        ds = [det(0.5, box(0, 0, 1, 1)), det(0.0, box(1, 1, 2, 2))]
        assert confidence_filter(ds, 0.0) == ds

    def test_empty(self):
        assert confidence_filter([], 0.9) == []

    def test_order_preserved(self):
        ds = [det(0.95, box(0, 0, 1, 1)), det(0.91, box(1, 0, 2, 1)),
              det(0.99, box(2, 0, 3, 1))]
        assert confidence_filter(ds, 0.9) == ds


class TestNms:
    def test_single_detection(self):
        d = det(0.9, box(0, 0, 10, 10))
        assert nms([d], 0.3) == [d]

    def test_identical_boxes_keep_strongest(self):
        a = det(0.95, box(0, 0, 10, 10))
        b = det(0.91, box(0, 0, 10, 10))
        assert nms([a, b], 0.3) == [a]

    def test_chain_keeps_ends(self):
        # A contains half of B (IoU 0.5), C is B's other half (IoU 0.5 with B),
        # A and C touch with zero-area intersection.
        a = det(0.95, box(0, 0, 10, 5))
        b = det(0.90, box(0, 0, 10, 10))
        c = det(0.85, box(0, 5, 10, 10))
        assert iou(a.box, b.box) == 0.5
        assert iou(b.box, c.box) == 0.5
        assert iou(a.box, c.box) == 0.0
        assert nms([c, a, b], 0.3) == [a, c]

    def test_threshold_is_strict(self):
        # exactly at the threshold survives
        a = det(0.95, box(0, 0, 10, 6))
        b = det(0.90, box(0, 2, 10, 8))
        assert iou(a.box, b.box) == pytest.approx(0.5)
        assert nms([a, b], 0.5) == [a, b]

    def test_mixed_group_rejected(self):
        a = det(0.9, box(0, 0, 1, 1), frame=0)
        b = det(0.9, box(0, 0, 1, 1), frame=1)
        with pytest.raises(ValueError):
            nms([a, b], 0.3)

    def _random_group(self, rng, n):
        out = []
        for _ in range(n):
            l, t = rng.uniform(0, 60, 2)
            out.append(det(float(rng.uniform(0.5, 1.0)),
                           box(l, t, l + rng.uniform(5, 40), t + rng.uniform(5, 40))))
        return out

    def test_output_is_antichain(self):
        rng = np.random.default_rng(21)
        for _ in range(100):
            kept = nms(self._random_group(rng, int(rng.integers(1, 12))), 0.3)
            for i, a in enumerate(kept):
                for b in kept[i + 1:]:
                    assert iou(a.box, b.box) <= 0.3

    def test_idempotent(self):
        rng = np.random.default_rng(22)
        for _ in range(100):
            once = nms(self._random_group(rng, int(rng.integers(1, 12))), 0.3)
            assert nms(once, 0.3) == once

    def test_sorted_by_confidence(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            kept = nms(self._random_group(rng, 8), 0.3)
            confs = [d.confidence for d in kept]
            assert confs == sorted(confs, reverse=True)
