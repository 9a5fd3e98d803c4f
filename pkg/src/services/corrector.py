"""Bayesian prediction-ensemble correction of noisy box annotations.

Each boundary of an annotation is re-estimated as the weighted mean of the
annotated value and the matching boundaries of the teacher predictions:

    l_cor = (l* + sum_i delta_i * l_i) / (1 + sum_i delta_i)

which is the static Kalman posterior mean when the prior covariance is a
scalar multiple delta_i of each measurement covariance. The weight is
delta_i = f(IoU(b_i, b*)) * p_{i,c*}.
"""

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.config import integer_setting
from src.errors import ConfigError
from src.models.annotation import Instance, Prediction
from src.models.box import BBox
from src.services.geometry import iou, sanitize

logger = logging.getLogger(__name__)


class WeightKind(str, Enum):
    STEP = 'step'
    GAUSSIAN = 'gauss'
    STEP_ONLY = 'step-only'     # indicator without the score factor
    SCORE = 'score'             # score alone, no IoU gating


@dataclass(frozen=True)
class WeightFn:
    kind: WeightKind
    param: Optional[float] = None

    def __post_init__(self):
        if self.kind in (WeightKind.STEP, WeightKind.STEP_ONLY):
            if self.param is None or not 0.0 <= self.param <= 1.0:
                raise ConfigError(f'step threshold tau must lie in [0, 1], got {self.param}')
        elif self.kind is WeightKind.GAUSSIAN:
            if self.param is None or not self.param > 0.0:
                raise ConfigError(f'gaussian width alpha must be positive, got {self.param}')

    @classmethod
    def step(cls, tau: float) -> 'WeightFn':
        return cls(WeightKind.STEP, tau)

    @classmethod
    def gaussian(cls, alpha: float) -> 'WeightFn':
        return cls(WeightKind.GAUSSIAN, alpha)

    @classmethod
    def parse(cls, text: str) -> 'WeightFn':
        """Parse ``step:0.7``, ``gauss:0.1``, ``step-only:0.7`` or ``score``."""
        name, _, value = str(text).partition(':')
        try:
            kind = WeightKind(name.strip())
        except ValueError:
            raise ConfigError(f'unknown weight function {text!r}; '
                              'expected step:TAU, gauss:ALPHA, step-only:TAU or score') from None
        if kind is WeightKind.SCORE:
            return cls(kind)
        try:
            return cls(kind, float(value))
        except ValueError:
            raise ConfigError(f'weight function {text!r} needs a numeric parameter') from None

    def __str__(self):
        if self.param is None:
            return self.kind.value
        return f'{self.kind.value}:{self.param:g}'

    @property
    def uses_score(self) -> bool:
        return self.kind is not WeightKind.STEP_ONLY

    def f(self, overlap: float) -> float:
        """The IoU response, non-decreasing on [0, 1]."""
        if self.kind in (WeightKind.STEP, WeightKind.STEP_ONLY):
            return 1.0 if overlap >= self.param else 0.0
        if self.kind is WeightKind.GAUSSIAN:
            return math.exp(-((1.0 - overlap) ** 2) / self.param)
        return 1.0


@dataclass(frozen=True)
class CorrectionConfig:
    weight: WeightFn = field(default_factory=lambda: WeightFn.step(0.7))
    iou_floor: float = 0.5
    score_floor: float = 0.05
    top_k: int = 1000

    def __post_init__(self):
        if not 0.0 <= self.iou_floor <= 1.0:
            raise ConfigError(f'iou_floor must lie in [0, 1], got {self.iou_floor}')
        if not 0.0 <= self.score_floor <= 1.0:
            raise ConfigError(f'score_floor must lie in [0, 1], got {self.score_floor}')
        if int(self.top_k) != self.top_k or self.top_k < 1:
            raise ConfigError(f'top_k must be a positive integer, got {self.top_k}')

    @classmethod
    def from_dict(cls, data: Dict) -> 'CorrectionConfig':
        defaults = cls()
        weight = data.get('weight')
        try:
            return cls(
                weight=WeightFn.parse(weight) if weight is not None else defaults.weight,
                iou_floor=float(data.get('iou_floor', defaults.iou_floor)),
                score_floor=float(data.get('score_floor', defaults.score_floor)),
                top_k=integer_setting(data.get('top_k', defaults.top_k), 'top_k')
            )
        except (TypeError, ValueError) as e:
            raise ConfigError(f'invalid correction config: {e}') from None

    def to_dict(self) -> Dict:
        return {
            'weight': str(self.weight),
            'iou_floor': self.iou_floor,
            'score_floor': self.score_floor,
            'top_k': self.top_k
        }


@dataclass
class InstanceCorrection:
    instance_id: int
    delta_sum: float
    kept: int
    changed: bool
    clamped: bool

    def to_dict(self) -> Dict:
        return {
            'id': self.instance_id,
            'delta_sum': self.delta_sum,
            'kept': self.kept,
            'changed': self.changed,
            'clamped': self.clamped
        }


@dataclass
class CorrectionReport:
    config: CorrectionConfig
    rows: List[InstanceCorrection] = field(default_factory=list)
    unknown_image_ids: List[int] = field(default_factory=list)
    unknown_image_predictions: int = 0

    @property
    def n_instances(self) -> int:
        return len(self.rows)

    @property
    def unchanged_count(self) -> int:
        return sum(1 for row in self.rows if not row.changed)

    @property
    def unchanged_fraction(self) -> float:
        return self.unchanged_count / self.n_instances if self.rows else 1.0

    @property
    def clamp_count(self) -> int:
        return sum(1 for row in self.rows if row.clamped)

    def to_dict(self, include_rows: bool = True) -> Dict:
        payload = {
            'correction': self.config.to_dict(),
            'n_instances': self.n_instances,
            'unchanged_count': self.unchanged_count,
            'unchanged_fraction': self.unchanged_fraction,
            'clamp_count': self.clamp_count,
            'unknown_image_ids': list(self.unknown_image_ids),
            'unknown_image_predictions': self.unknown_image_predictions
        }
        if include_rows:
            payload['instances'] = [row.to_dict() for row in self.rows]
        return payload


def weight(prediction: Prediction, annotation: Instance, fn: WeightFn) -> float:
    """delta_i = f(IoU(b_i, b*)) * p_{i,c*}; zero when the category has no score."""
    if annotation.category_id not in prediction.scores:
        return 0.0
    response = fn.f(iou(prediction.box, annotation.box))
    if not fn.uses_score:
        return response
    return response * prediction.score_for(annotation.category_id)


def filter_predictions(predictions: Sequence[Prediction], annotation: Instance,
                       cfg: CorrectionConfig) -> List[Prediction]:
    """Drop far-away or low-score predictions, then keep the top_k by score."""
    candidates = []
    for index, prediction in enumerate(predictions):
        score = prediction.score_for(annotation.category_id)
        if score < cfg.score_floor:
            continue
        if iou(prediction.box, annotation.box) < cfg.iou_floor:
            continue
        candidates.append((-score, index, prediction))
    candidates.sort(key=lambda item: (item[0], item[1]))
    return [prediction for _, _, prediction in candidates[:cfg.top_k]]


def fuse_boxes(prior: BBox, boxes: Sequence[BBox], deltas: Sequence[float]) -> List[float]:
    """Per-boundary weighted mean of the prior (weight 1) and the boxes."""
    delta_sum = math.fsum(deltas)
    weighted = np.array([[delta * c for c in box.to_list()] for delta, box in zip(deltas, boxes)]).reshape(-1, 4)
    prior_coords = prior.to_list()
    # fsum keeps the result independent of prediction order.
    return [(prior_coords[i] + math.fsum(weighted[:, i])) / (1.0 + delta_sum) for i in range(4)]


def _correct(annotation: Instance, predictions: Sequence[Prediction],
             cfg: CorrectionConfig) -> Tuple[BBox, InstanceCorrection]:
    kept = filter_predictions(predictions, annotation, cfg)
    deltas = [weight(prediction, annotation, cfg.weight) for prediction in kept]
    used = [(delta, prediction) for delta, prediction in zip(deltas, kept) if delta > 0.0]
    delta_sum = math.fsum(delta for delta, _ in used)

    if delta_sum == 0.0:
        row = InstanceCorrection(annotation.id, 0.0, len(kept), changed=False, clamped=False)
        return annotation.box, row

    corrected = fuse_boxes(annotation.box, [p.box for _, p in used], [d for d, _ in used])
    box, clamped = sanitize(corrected)
    changed = box != annotation.box
    row = InstanceCorrection(annotation.id, delta_sum, len(kept), changed=changed, clamped=clamped)
    return (box if changed else annotation.box), row


def correct_box(annotation: Instance, predictions: Sequence[Prediction], cfg: CorrectionConfig) -> BBox:
    """Corrected box for one annotation.

    Filtering is idempotent, so already-filtered predictions may be passed.
    """
    return _correct(annotation, predictions, cfg)[0]


def correct_dataset(annotations: Sequence[Instance], predictions: Iterable[Prediction],
                    cfg: CorrectionConfig,
                    image_ids: Optional[Iterable[int]] = None) -> Tuple[List[Instance], CorrectionReport]:
    """Correct every annotation with the predictions of its own image.

    ``image_ids`` names the images of the dataset; predictions for other
    images are reported, not used. Defaults to the annotated images.
    """
    by_image: Dict[int, List[Prediction]] = defaultdict(list)
    for prediction in predictions:
        by_image[prediction.image_id].append(prediction)

    known = set(image_ids) if image_ids is not None else {a.image_id for a in annotations}
    report = CorrectionReport(config=cfg)
    report.unknown_image_ids = sorted(image_id for image_id in by_image if image_id not in known)
    report.unknown_image_predictions = sum(len(by_image[image_id]) for image_id in report.unknown_image_ids)
    if report.unknown_image_ids:
        logger.warning('%d predictions reference %d unknown image ids; they were ignored',
                       report.unknown_image_predictions, len(report.unknown_image_ids))

    corrected = []
    for annotation in annotations:
        box, row = _correct(annotation, by_image.get(annotation.image_id, ()), cfg)
        report.rows.append(row)
        corrected.append(annotation if box is annotation.box else annotation.with_box(box))

    if report.clamp_count:
        logger.warning('%d corrected boxes were inverted and clamped', report.clamp_count)
    logger.info('corrected %d annotations, %d unchanged', report.n_instances, report.unchanged_count)
    return corrected, report
