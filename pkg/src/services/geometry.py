"""IoU and box-array helpers."""

import numpy as np

from src.models.box import BBox, MIN_EXTENT


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union; 0 when the union has no area."""
    inter_w = min(a.r, b.r) - max(a.l, b.l)
    inter_h = min(a.b, b.b) - max(a.t, b.t)
    inter = max(inter_w, 0.0) * max(inter_h, 0.0)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between two (N, 4) and (M, 4) corner arrays."""
    a = np.asarray(a, dtype=float).reshape(-1, 4)
    b = np.asarray(b, dtype=float).reshape(-1, 4)
    lt = np.maximum(a[:, None, :2], b[None, :, :2])
    rb = np.minimum(a[:, None, 2:], b[None, :, 2:])
    wh = np.clip(rb - lt, 0.0, None)
    inter = wh[..., 0] * wh[..., 1]
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0.0)
    return np.clip(out, 0.0, 1.0)


def sanitize(coords) -> tuple:
    """Turn raw (l, t, r, b) values into a valid box.

    Returns ``(box, clamped)``; see ``BBox.clamped`` for the repair rule.
    """
    l, t, r, b = (float(c) for c in coords)
    return BBox.clamped(l, t, r, b)


def relative_offsets(reference: BBox, candidate: BBox) -> np.ndarray:
    """Signed (l, t, r, b) differences normalised by the reference width/height."""
    extents = np.array([reference.width, reference.height, reference.width, reference.height])
    return (candidate.as_array() - reference.as_array()) / extents


__all__ = ['iou', 'iou_matrix', 'sanitize', 'relative_offsets', 'MIN_EXTENT']
