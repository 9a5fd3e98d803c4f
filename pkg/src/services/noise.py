"""Synthetic location noise for box annotations.

Three corruption laws are supported, all parameterised by the noise level
gamma, the root mean squared boundary error relative to the object width
(left/right) or height (top/bottom):

* ``gaussian``: zero-mean Gaussian per boundary with sigma = gamma * extent.
* ``exp-enclosing``: every boundary moves outward by an exponential draw,
  so the noisy box contains the clean one.
* ``exp-enclosed``: every boundary moves inward by an exponential draw.

For the exponential laws the rate is lambda = sqrt(2) / gamma, since an
exponential variable has E[X^2] = 2 / lambda^2.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from src.errors import ConfigError, EmptyInputError, InstanceError, InvalidBoxError, ToolkitError
from src.models.annotation import Instance
from src.models.box import BBox
from src.services.geometry import relative_offsets, sanitize

logger = logging.getLogger(__name__)

BOUNDARIES = ('left', 'top', 'right', 'bottom')

# Stream tags mixed into per-instance seeds so independent draws never share a stream.
ANNOTATION_STREAM = 0
PREDICTION_STREAM = 1

_SEED_MASK = (1 << 63) - 1


class NoiseKind(str, Enum):
    GAUSSIAN = 'gaussian'
    EXP_ENCLOSING = 'exp-enclosing'
    EXP_ENCLOSED = 'exp-enclosed'


@dataclass(frozen=True)
class NoiseModel:
    kind: NoiseKind
    gamma: float

    def __post_init__(self):
        if not math.isfinite(self.gamma) or self.gamma < 0:
            raise ConfigError(f'noise level gamma must be a non-negative number, got {self.gamma}')

    @classmethod
    def parse(cls, kind: str, gamma: float) -> 'NoiseModel':
        try:
            noise_kind = NoiseKind(kind)
        except ValueError:
            choices = ', '.join(k.value for k in NoiseKind)
            raise ConfigError(f'unknown noise model {kind!r}; expected one of {choices}') from None
        try:
            return cls(noise_kind, float(gamma))
        except (TypeError, ValueError):
            raise ConfigError(f'noise level gamma must be a number, got {gamma!r}') from None

    @classmethod
    def from_dict(cls, data: Dict) -> 'NoiseModel':
        return cls.parse(data.get('model', NoiseKind.GAUSSIAN.value), data.get('gamma', 0.0))

    @property
    def rate(self) -> float:
        """Exponential rate lambda in units of 1/extent (inf when gamma is 0)."""
        return math.inf if self.gamma == 0 else math.sqrt(2.0) / self.gamma

    def to_dict(self) -> Dict:
        return {'model': self.kind.value, 'gamma': self.gamma}

    def sample_relative_offsets(self, rng: np.random.Generator, size: int = 1) -> np.ndarray:
        """Signed (l, t, r, b) offsets relative to w/h, shape (size, 4)."""
        if self.gamma == 0:
            return np.zeros((size, 4))
        if self.kind is NoiseKind.GAUSSIAN:
            return rng.normal(0.0, self.gamma, size=(size, 4))
        magnitudes = rng.exponential(1.0 / self.rate, size=(size, 4))
        outward = np.array([-1.0, -1.0, 1.0, 1.0])
        if self.kind is NoiseKind.EXP_ENCLOSING:
            return magnitudes * outward
        return -magnitudes * outward


@dataclass
class CorruptionSummary:
    model: NoiseModel
    master_seed: int
    n_instances: int = 0
    clamp_count: int = 0
    clamped_ids: List[int] = field(default_factory=list)
    empirical_gamma: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {
            'model': self.model.to_dict(),
            'seed': self.master_seed,
            'n_instances': self.n_instances,
            'clamp_count': self.clamp_count,
            'clamp_rate': self.clamp_count / self.n_instances if self.n_instances else 0.0,
            'clamped_ids': list(self.clamped_ids),
            'empirical_gamma': dict(self.empirical_gamma)
        }


def instance_rng(master_seed: int, instance_id: int, stream: int = ANNOTATION_STREAM) -> np.random.Generator:
    """Generator seeded purely from (master_seed, instance id, stream)."""
    entropy = [master_seed & _SEED_MASK, instance_id & _SEED_MASK, stream]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _corrupt(clean: BBox, model: NoiseModel, rng: np.random.Generator) -> Tuple[BBox, bool]:
    if clean.width <= 0 or clean.height <= 0:
        raise InvalidBoxError(f'cannot corrupt a box with zero width or height: {clean.to_list()}')
    if model.gamma == 0:
        return clean, False
    offsets = model.sample_relative_offsets(rng)[0]
    extents = np.array([clean.width, clean.height, clean.width, clean.height])
    return sanitize(clean.as_array() + offsets * extents)


def corrupt_box(clean: BBox, model: NoiseModel, rng: np.random.Generator) -> BBox:
    """Perturb each boundary of ``clean`` independently under ``model``."""
    return _corrupt(clean, model, rng)[0]


def corrupt_dataset_with_summary(instances: Iterable[Instance], model: NoiseModel, master_seed: int,
                                 image_sizes: Optional[Dict[int, tuple]] = None,
                                 stream: int = ANNOTATION_STREAM) -> Tuple[List[Instance], CorruptionSummary]:
    """Corrupt every instance; optionally clip results to their image bounds."""
    summary = CorruptionSummary(model=model, master_seed=master_seed)
    corrupted = []
    relative = []
    for instance in instances:
        rng = instance_rng(master_seed, instance.id, stream)
        try:
            box, clamped = _corrupt(instance.box, model, rng)
        except ToolkitError as e:
            raise InstanceError(instance.id, e)
        if image_sizes is not None:
            width, height = image_sizes.get(instance.image_id, (None, None))
            if width is not None and height is not None:
                box = box.clip(width, height)
        if clamped:
            summary.clamp_count += 1
            summary.clamped_ids.append(instance.id)
        relative.append(relative_offsets(instance.box, box))
        corrupted.append(instance.with_box(box))

    summary.n_instances = len(corrupted)
    if relative:
        errors = np.array(relative)
        summary.empirical_gamma = {name: estimate_noise_level(errors[:, i]) for i, name in enumerate(BOUNDARIES)}
        summary.empirical_gamma['overall'] = estimate_noise_level(errors.ravel())
    if summary.clamp_count:
        logger.warning('%d of %d corrupted boxes were inverted and clamped', summary.clamp_count, summary.n_instances)
    return corrupted, summary


def corrupt_dataset(instances: Iterable[Instance], model: NoiseModel, master_seed: int) -> List[Instance]:
    return corrupt_dataset_with_summary(instances, model, master_seed)[0]


def estimate_noise_level(relative_errors) -> float:
    """Root mean squared relative error."""
    values = np.asarray(relative_errors, dtype=float)
    if values.size == 0:
        raise EmptyInputError('cannot estimate a noise level from zero samples')
    return float(np.sqrt(np.mean(np.square(values))))
