"""COCO-style average precision for box detections.

Detections are ranked by score (ties by input position), greedily matched per
image to the unmatched ground truth of the same category with the highest IoU
at or above the threshold, and AP is the 101-point interpolated precision.
Crowd ground truth takes no part in matching or in the recall denominator.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import ConfigError
from src.models.annotation import Instance, Prediction
from src.services.geometry import iou_matrix

logger = logging.getLogger(__name__)

COCO_THRESHOLDS = tuple(np.round(np.linspace(0.5, 0.95, 10), 2).tolist())
RECALL_POINTS = np.linspace(0.0, 1.0, 101)
# COCO area brackets in pixels^2.
AREA_RANGES = {
    'all': (0.0, float('inf')),
    'small': (0.0, 32.0 ** 2),
    'medium': (32.0 ** 2, 96.0 ** 2),
    'large': (96.0 ** 2, float('inf'))
}
DEFAULT_MAX_DETS = 100


@dataclass
class APResult:
    per_threshold: Dict[float, float]
    mAP: float
    per_category: Dict[int, float]
    by_area: Dict[str, float] = field(default_factory=dict)
    ignored_predictions: int = 0

    def ap_at(self, threshold: float) -> Optional[float]:
        for t, value in self.per_threshold.items():
            if abs(t - threshold) < 1e-9:
                return value
        return None

    def to_dict(self) -> Dict:
        payload = {
            'per_threshold': {f'{t:.2f}': ap for t, ap in self.per_threshold.items()},
            'mAP': self.mAP,
            'AP50': self.ap_at(0.5),
            'AP75': self.ap_at(0.75),
            'per_category': {str(c): ap for c, ap in self.per_category.items()},
            'ignored_predictions': self.ignored_predictions
        }
        if self.by_area:
            payload['by_area'] = dict(self.by_area)
        return payload


@dataclass
class _Detection:
    position: int
    image_id: int
    category_id: int
    score: float
    box: np.ndarray


def _check_thresholds(thresholds: Sequence[float]) -> List[float]:
    thresholds = [float(t) for t in thresholds]
    if not thresholds:
        raise ConfigError('at least one IoU threshold is required')
    if any(not 0.0 <= t <= 1.0 for t in thresholds):
        raise ConfigError(f'IoU thresholds must lie in [0, 1], got {thresholds}')
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ConfigError(f'IoU thresholds must be strictly increasing, got {thresholds}')
    return thresholds


def _expand(predictions: Iterable[Prediction], known_categories: set) -> Tuple[List[_Detection], int]:
    detections = []
    ignored = 0
    position = 0
    for prediction in predictions:
        for category_id, score in prediction.scores.items():
            if category_id not in known_categories:
                ignored += 1
                continue
            detections.append(_Detection(position, prediction.image_id, category_id, float(score),
                                         prediction.box.as_array()))
            position += 1
    return detections, ignored


def _interpolated_ap(tp: np.ndarray, fp: np.ndarray, n_positive: int) -> float:
    if n_positive == 0:
        return 0.0
    if tp.size == 0:
        return 0.0
    tp_cum = np.cumsum(tp)
    fp_cum = np.cumsum(fp)
    recall = tp_cum / n_positive
    precision = tp_cum / np.maximum(tp_cum + fp_cum, np.finfo(float).eps)
    # Make precision monotonically non-increasing from the right.
    precision = np.maximum.accumulate(precision[::-1])[::-1]
    indices = np.searchsorted(recall, RECALL_POINTS, side='left')
    sampled = np.array([precision[i] if i < precision.size else 0.0 for i in indices])
    return float(np.mean(sampled))


def _category_ap(detections: List[_Detection], gts: Dict[int, List[Instance]], threshold: float,
                 area_range: Tuple[float, float]) -> Optional[float]:
    """AP for one category, or None when it has no ground truth in the area range."""
    low, high = area_range

    def in_range(area: float) -> bool:
        return low <= area <= high

    ignore = {image_id: np.array([not in_range(g.box.area) for g in items], dtype=bool)
              for image_id, items in gts.items()}
    n_positive = int(sum(np.count_nonzero(~flags) for flags in ignore.values()))
    if n_positive == 0:
        return None

    gt_boxes = {image_id: np.array([g.box.to_list() for g in items], dtype=float).reshape(-1, 4)
                for image_id, items in gts.items()}
    matched = {image_id: np.zeros(len(items), dtype=bool) for image_id, items in gts.items()}
    tp, fp = [], []
    for det in detections:
        boxes = gt_boxes.get(det.image_id)
        match = -1
        if boxes is not None and boxes.size:
            overlaps = iou_matrix(det.box, boxes)[0]
            flags = ignore[det.image_id]
            # Prefer regular ground truth; fall back to ignored (out-of-range) ones.
            for want_ignored in (False, True):
                candidates = np.flatnonzero((~matched[det.image_id]) & (flags == want_ignored)
                                            & (overlaps >= threshold))
                if candidates.size:
                    # Highest IoU, ties by smaller ground-truth id.
                    ids = np.array([gts[det.image_id][c].id for c in candidates])
                    order = np.lexsort((ids, -overlaps[candidates]))
                    match = int(candidates[order[0]])
                    break
        if match >= 0:
            matched[det.image_id][match] = True
            if ignore[det.image_id][match]:
                continue
            tp.append(1.0)
            fp.append(0.0)
        else:
            width = det.box[2] - det.box[0]
            height = det.box[3] - det.box[1]
            if not in_range(width * height):
                continue
            tp.append(0.0)
            fp.append(1.0)
    return _interpolated_ap(np.array(tp), np.array(fp), n_positive)


def _limit_per_image(detections: List[_Detection], max_dets: Optional[int]) -> List[_Detection]:
    if max_dets is None:
        return detections
    counts: Dict[int, int] = defaultdict(int)
    kept = []
    for det in detections:
        if counts[det.image_id] < max_dets:
            counts[det.image_id] += 1
            kept.append(det)
    return kept


def _evaluate(detections: List[_Detection], gts_by_category: Dict[int, Dict[int, List[Instance]]],
              thresholds: List[float], area_range: Tuple[float, float],
              max_dets: Optional[int]) -> Tuple[Dict[float, float], Dict[int, float]]:
    by_category: Dict[int, List[_Detection]] = defaultdict(list)
    for det in detections:
        by_category[det.category_id].append(det)

    table: Dict[int, Dict[float, float]] = {}
    for category_id, gts in gts_by_category.items():
        ranked = sorted(by_category.get(category_id, []), key=lambda d: (-d.score, d.position))
        ranked = _limit_per_image(ranked, max_dets)
        for threshold in thresholds:
            ap = _category_ap(ranked, gts, threshold, area_range)
            if ap is not None:
                table.setdefault(category_id, {})[threshold] = ap

    per_threshold = {}
    for threshold in thresholds:
        values = [row[threshold] for row in table.values() if threshold in row]
        per_threshold[threshold] = float(np.mean(values)) if values else 0.0
    per_category = {c: float(np.mean(list(row.values()))) for c, row in sorted(table.items())}
    return per_threshold, per_category


def evaluate_ap(predictions: Sequence[Prediction], ground_truth: Sequence[Instance],
                thresholds: Sequence[float] = COCO_THRESHOLDS,
                categories: Optional[Iterable[int]] = None,
                max_dets: Optional[int] = DEFAULT_MAX_DETS,
                area_breakdown: bool = False) -> APResult:
    """Per-threshold AP, mAP over thresholds, per-category mAP and optional size breakdown.

    ``categories`` is the known category set; predictions for other
    categories are ignored with a warning. Defaults to the ground-truth
    categories.
    """
    thresholds = _check_thresholds(thresholds)
    if max_dets is not None and max_dets < 1:
        raise ConfigError(f'max_dets must be positive, got {max_dets}')

    gts_by_category: Dict[int, Dict[int, List[Instance]]] = defaultdict(lambda: defaultdict(list))
    for instance in ground_truth:
        if instance.iscrowd:
            continue
        gts_by_category[instance.category_id][instance.image_id].append(instance)
    known = set(categories) if categories is not None else {g.category_id for g in ground_truth}

    detections, ignored = _expand(predictions, known)
    if ignored:
        logger.warning('%d predictions carry unknown category ids and were ignored', ignored)

    per_threshold, per_category = _evaluate(detections, gts_by_category, thresholds, AREA_RANGES['all'], max_dets)
    result = APResult(
        per_threshold=per_threshold,
        mAP=float(np.mean(list(per_threshold.values()))),
        per_category=per_category,
        ignored_predictions=ignored
    )
    if area_breakdown:
        for name in ('small', 'medium', 'large'):
            stratified, _ = _evaluate(detections, gts_by_category, thresholds, AREA_RANGES[name], max_dets)
            result.by_area[name] = float(np.mean(list(stratified.values())))
    return result
