"""Desk-scale corrupt -> correct -> measure experiments.

A frozen teacher detector is stood in for by boxes sampled around the clean
annotation, scored by their overlap with it. The corrector then only sees the
noisy annotations and these predictions, and the report measures how much
closer to the clean boxes the corrected annotations are.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.config import integer_setting
from src.errors import ConfigError, EmptyInputError, InstanceError, ToolkitError
from src.models.annotation import Instance, Prediction
from src.models.box import BBox
from src.services.corrector import CorrectionConfig, WeightFn, WeightKind, correct_dataset
from src.services.geometry import iou
from src.services.metrics import BoundaryStats, boundary_stats, error_samples
from src.services.noise import (NoiseKind, NoiseModel, PREDICTION_STREAM, corrupt_box,
                                corrupt_dataset_with_summary, instance_rng)

logger = logging.getLogger(__name__)


class ScoreLawKind(str, Enum):
    IOU_PROPORTIONAL = 'iou'
    CONSTANT = 'constant'


@dataclass(frozen=True)
class ScoreLaw:
    kind: ScoreLawKind = ScoreLawKind.IOU_PROPORTIONAL
    value: float = 0.1      # noise_sd for IOU_PROPORTIONAL, the score for CONSTANT

    def __post_init__(self):
        if self.value < 0:
            raise ConfigError(f'score law parameter must be non-negative, got {self.value}')
        if self.kind is ScoreLawKind.CONSTANT and self.value > 1:
            raise ConfigError(f'constant score must lie in [0, 1], got {self.value}')

    @classmethod
    def iou_proportional(cls, noise_sd: float) -> 'ScoreLaw':
        return cls(ScoreLawKind.IOU_PROPORTIONAL, noise_sd)

    @classmethod
    def constant(cls, score: float) -> 'ScoreLaw':
        return cls(ScoreLawKind.CONSTANT, score)

    @classmethod
    def from_dict(cls, data: Dict) -> 'ScoreLaw':
        try:
            kind = ScoreLawKind(data.get('law', ScoreLawKind.IOU_PROPORTIONAL.value))
        except ValueError:
            raise ConfigError(f"unknown score law {data.get('law')!r}; expected 'iou' or 'constant'") from None
        key = 'noise_sd' if kind is ScoreLawKind.IOU_PROPORTIONAL else 'score'
        default = 0.1 if kind is ScoreLawKind.IOU_PROPORTIONAL else 1.0
        return cls(kind, float(data.get(key, default)))

    def to_dict(self) -> Dict:
        if self.kind is ScoreLawKind.IOU_PROPORTIONAL:
            return {'law': self.kind.value, 'noise_sd': self.value}
        return {'law': self.kind.value, 'score': self.value}

    def score(self, overlap: float, rng: np.random.Generator) -> float:
        if self.kind is ScoreLawKind.CONSTANT:
            return self.value
        noise = rng.normal(0.0, self.value) if self.value > 0 else 0.0
        return float(np.clip(overlap + noise, 0.0, 1.0))


@dataclass(frozen=True)
class SimConfig:
    n_predictions: int = 20
    pred_noise: NoiseModel = field(default_factory=lambda: NoiseModel(NoiseKind.GAUSSIAN, 0.05))
    score_law: ScoreLaw = field(default_factory=ScoreLaw)
    seed: int = 0

    def __post_init__(self):
        if int(self.n_predictions) != self.n_predictions or self.n_predictions < 1:
            raise ConfigError(f'n_predictions must be a positive integer, got {self.n_predictions}')

    @classmethod
    def from_dict(cls, data: Dict) -> 'SimConfig':
        defaults = cls()
        try:
            return cls(
                n_predictions=integer_setting(data.get('n_predictions', defaults.n_predictions), 'n_predictions'),
                pred_noise=NoiseModel.from_dict(data['pred_noise']) if 'pred_noise' in data else defaults.pred_noise,
                score_law=ScoreLaw.from_dict(data['score_law']) if 'score_law' in data else defaults.score_law,
                seed=integer_setting(data.get('seed', defaults.seed), 'seed')
            )
        except (TypeError, ValueError) as e:
            raise ConfigError(f'invalid teacher config: {e}') from None

    def to_dict(self) -> Dict:
        return {
            'n_predictions': self.n_predictions,
            'pred_noise': self.pred_noise.to_dict(),
            'score_law': self.score_law.to_dict(),
            'seed': self.seed
        }


@dataclass
class ExperimentReport:
    n_instances: int
    mean_iou_noisy: float
    mean_iou_corrected: float
    noisy_errors: Dict[str, BoundaryStats]
    corrected_errors: Dict[str, BoundaryStats]
    annotation_clamp_count: int
    correction_clamp_count: int
    unchanged_count: int
    rows: List[Dict] = field(default_factory=list)

    @property
    def iou_gain(self) -> float:
        return self.mean_iou_corrected - self.mean_iou_noisy

    def to_dict(self, include_rows: bool = False) -> Dict:
        payload = {
            'n_instances': self.n_instances,
            'mean_iou_noisy': self.mean_iou_noisy,
            'mean_iou_corrected': self.mean_iou_corrected,
            'iou_gain': self.iou_gain,
            'errors': {
                'noisy': {name: stats.to_dict() for name, stats in self.noisy_errors.items()},
                'corrected': {name: stats.to_dict() for name, stats in self.corrected_errors.items()}
            },
            'clamp_counts': {
                'annotation': self.annotation_clamp_count,
                'correction': self.correction_clamp_count
            },
            'unchanged_count': self.unchanged_count
        }
        if include_rows:
            payload['instances'] = list(self.rows)
        return payload


def simulate_predictions(clean: Instance, cfg: SimConfig, rng: np.random.Generator) -> List[Prediction]:
    """Teacher outputs around ``clean``, scored for its category."""
    predictions = []
    for _ in range(cfg.n_predictions):
        box = corrupt_box(clean.box, cfg.pred_noise, rng)
        score = cfg.score_law.score(iou(box, clean.box), rng)
        predictions.append(Prediction(image_id=clean.image_id, box=box, scores={clean.category_id: score}))
    return predictions


def simulate_teacher(clean_instances: Sequence[Instance], cfg: SimConfig) -> List[Prediction]:
    """Predictions for a whole dataset, seeded per instance from ``cfg.seed``."""
    predictions = []
    for instance in clean_instances:
        rng = instance_rng(cfg.seed, instance.id, PREDICTION_STREAM)
        try:
            predictions.extend(simulate_predictions(instance, cfg, rng))
        except ToolkitError as e:
            raise InstanceError(instance.id, e)
    return predictions


def run_experiment(clean_instances: Sequence[Instance], ann_noise: NoiseModel, sim: SimConfig,
                   cfg: CorrectionConfig, seed: int) -> ExperimentReport:
    """Corrupt with ``ann_noise`` (seeded by ``seed``), simulate the teacher
    (seeded by ``sim.seed``), correct, and compare both to the clean boxes."""
    clean_instances = list(clean_instances)
    if not clean_instances:
        raise EmptyInputError('run_experiment needs at least one clean instance')

    noisy, corruption = corrupt_dataset_with_summary(clean_instances, ann_noise, seed)
    predictions = simulate_teacher(clean_instances, sim)
    corrected, correction = correct_dataset(noisy, predictions, cfg)

    noisy_ious = np.array([iou(n.box, c.box) for n, c in zip(noisy, clean_instances)])
    corrected_ious = np.array([iou(k.box, c.box) for k, c in zip(corrected, clean_instances)])

    rows = []
    for index, (clean, row) in enumerate(zip(clean_instances, correction.rows)):
        rows.append({
            'id': clean.id,
            'image_id': clean.image_id,
            'iou_noisy': float(noisy_ious[index]),
            'iou_corrected': float(corrected_ious[index]),
            'delta_sum': row.delta_sum,
            'kept': row.kept
        })

    report = ExperimentReport(
        n_instances=len(clean_instances),
        mean_iou_noisy=float(np.mean(noisy_ious)),
        mean_iou_corrected=float(np.mean(corrected_ious)),
        noisy_errors=boundary_stats(error_samples(clean_instances, noisy)),
        corrected_errors=boundary_stats(error_samples(clean_instances, corrected)),
        annotation_clamp_count=corruption.clamp_count,
        correction_clamp_count=correction.clamp_count,
        unchanged_count=correction.unchanged_count,
        rows=rows
    )
    logger.info('experiment over %d instances: mean IoU %.4f -> %.4f',
                report.n_instances, report.mean_iou_noisy, report.mean_iou_corrected)
    return report


def weight_sweep(base: Optional[CorrectionConfig] = None) -> List[Tuple[str, CorrectionConfig]]:
    """The delta_i design choices: score only, indicator only, step * score, gaussian * score.

    The score-only row also drops the IoU pre-filter so no IoU gating remains.
    """
    base = base or CorrectionConfig()
    choices = [('score', replace(base, weight=WeightFn(WeightKind.SCORE), iou_floor=0.0)),
               ('step-only:0.7', replace(base, weight=WeightFn(WeightKind.STEP_ONLY, 0.7)))]
    for tau in (0.5, 0.6, 0.7):
        choices.append((f'step:{tau}', replace(base, weight=WeightFn.step(tau))))
    for alpha in (0.2, 0.1, 0.05):
        choices.append((f'gauss:{alpha}', replace(base, weight=WeightFn.gaussian(alpha))))
    return choices


def run_weight_sweep(clean_instances: Sequence[Instance], ann_noise: NoiseModel, sim: SimConfig, seed: int,
                     base: Optional[CorrectionConfig] = None) -> Dict[str, ExperimentReport]:
    return {label: run_experiment(clean_instances, ann_noise, sim, cfg, seed)
            for label, cfg in weight_sweep(base)}


@dataclass(frozen=True)
class SynthesisConfig:
    n_instances: int = 1000
    per_image: int = 4
    n_categories: int = 1
    image_width: float = 640.0
    image_height: float = 480.0
    min_extent: float = 32.0
    max_extent: float = 192.0

    def __post_init__(self):
        if self.n_instances < 1 or self.per_image < 1 or self.n_categories < 1:
            raise ConfigError('n_instances, per_image and n_categories must be positive')
        if not 0 < self.min_extent <= self.max_extent:
            raise ConfigError('extent range must satisfy 0 < min_extent <= max_extent')
        if self.max_extent > min(self.image_width, self.image_height):
            raise ConfigError('max_extent must fit inside the virtual image')

    @classmethod
    def from_dict(cls, data: Dict) -> 'SynthesisConfig':
        known = {name: data[name] for name in cls.__dataclass_fields__ if name in data}
        for name in ('n_instances', 'per_image', 'n_categories'):
            if name in known:
                known[name] = integer_setting(known[name], name)
        try:
            return cls(**known)
        except TypeError as e:
            raise ConfigError(f'invalid instance synthesis config: {e}') from None

    def to_dict(self) -> Dict:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


def synthesize_instances(cfg: SynthesisConfig, seed: int) -> List[Instance]:
    """Uniformly placed clean boxes, ``per_image`` objects per virtual image."""
    rng = np.random.default_rng(np.random.SeedSequence([seed & ((1 << 63) - 1), 2]))
    instances = []
    for index in range(cfg.n_instances):
        w, h = rng.uniform(cfg.min_extent, cfg.max_extent, size=2)
        x = rng.uniform(0.0, cfg.image_width - w)
        y = rng.uniform(0.0, cfg.image_height - h)
        instances.append(Instance(
            id=index + 1,
            image_id=index // cfg.per_image + 1,
            category_id=int(rng.integers(cfg.n_categories)) + 1,
            box=BBox(float(x), float(y), float(x + w), float(y + h))
        ))
    return instances


def synthetic_images(instances: Sequence[Instance], cfg: SynthesisConfig) -> List[Dict]:
    image_ids = sorted({instance.image_id for instance in instances})
    return [{'id': image_id, 'width': cfg.image_width, 'height': cfg.image_height,
             'file_name': f'synthetic_{image_id:06d}.jpg'} for image_id in image_ids]


def synthetic_categories(cfg: SynthesisConfig) -> List[Dict]:
    return [{'id': i + 1, 'name': f'object_{i + 1}'} for i in range(cfg.n_categories)]
