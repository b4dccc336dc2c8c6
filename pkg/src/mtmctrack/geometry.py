"""Bounding-box arithmetic: IoU, hard gates, confidence filter, NMS."""

from __future__ import annotations

import math

import numpy as np

from .model import BoundingBox, Detection


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes; 0.0 when disjoint."""
    iw = min(a.right, b.right) - max(a.left, b.left)
    ih = min(a.bottom, b.bottom) - max(a.top, b.top)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def iou_arrays(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise IoU of two (n, 4) arrays of [left, top, right, bottom]."""
    iw = np.minimum(a[:, 2], b[:, 2]) - np.maximum(a[:, 0], b[:, 0])
    ih = np.minimum(a[:, 3], b[:, 3]) - np.maximum(a[:, 1], b[:, 1])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    return inter / (area_a + area_b - inter)


def iou_grid(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """All-pairs IoU between (n, 4) and (m, 4) box arrays, shape (n, m)."""
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    return inter / (area_a[:, None] + area_b[None, :] - inter)


def gate(x: float, k: float) -> float:
    """Hard gate: +inf below the threshold, 0 at or above it."""
    return 0.0 if x >= k else math.inf


def confidence_filter(detections: list[Detection], threshold: float) -> list[Detection]:
    """Keep detections with confidence >= threshold, order preserved."""
    return [d for d in detections if d.confidence >= threshold]


def nms(detections: list[Detection], iou_threshold: float) -> list[Detection]:
    """Greedy non-maximum suppression over one camera+frame group.

    Repeatedly keeps the highest-confidence remaining detection and drops
    every other whose IoU with it exceeds the threshold (strictly greater).
    Ties on confidence break lexicographically on box coordinates so output
    is deterministic.
    """
    if len(detections) > 1:
        keys = {(d.camera, d.frame) for d in detections}
        if len(keys) != 1:
            raise ValueError("nms input must share one camera and frame")
    remaining = sorted(detections, key=lambda d: (-d.confidence, d.box.as_tuple()))
    kept: list[Detection] = []
    while remaining:
        head = remaining.pop(0)
        kept.append(head)
        remaining = [d for d in remaining if iou(head.box, d.box) <= iou_threshold]
    return kept
