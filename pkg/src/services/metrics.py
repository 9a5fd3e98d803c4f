"""Boundary-error analytics: error samples, per-boundary statistics,
cross-boundary correlation and the error-vs-scale fit."""

import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Sequence, Tuple

import numpy as np

from src.errors import EmptyInputError, IdMismatchError, InvalidBoxError
from src.models.annotation import Instance

logger = logging.getLogger(__name__)


class Boundary(str, Enum):
    LEFT = 'left'
    TOP = 'top'
    RIGHT = 'right'
    BOTTOM = 'bottom'


# Corner order (l, t, r, b); horizontal boundaries scale with width.
BOUNDARY_ORDER = (Boundary.LEFT, Boundary.TOP, Boundary.RIGHT, Boundary.BOTTOM)


@dataclass(frozen=True)
class ErrorSample:
    instance_id: int
    boundary: Boundary
    relative_error: float
    absolute_error: float
    object_extent: float


@dataclass(frozen=True)
class BoundaryStats:
    count: int
    mean: float
    std: float
    gamma: float

    def to_dict(self) -> Dict:
        return {'count': self.count, 'mean': self.mean, 'std': self.std, 'gamma': self.gamma}


@dataclass
class CorrelationResult:
    matrix: np.ndarray
    n_instances: int
    zero_variance: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            'boundaries': [b.value for b in BOUNDARY_ORDER],
            'matrix': self.matrix.tolist(),
            'n_instances': self.n_instances,
            'zero_variance': list(self.zero_variance)
        }


@dataclass
class ScaleScatter:
    pairs: List[Tuple[float, float]]
    slope: float

    def to_dict(self, include_pairs: bool = False) -> Dict:
        payload = {'n_samples': len(self.pairs), 'slope': self.slope}
        if include_pairs:
            payload['pairs'] = [list(pair) for pair in self.pairs]
        return payload


def error_samples(reference: Sequence[Instance], candidate: Sequence[Instance]) -> List[ErrorSample]:
    """Four signed samples (candidate minus reference) per matched instance."""
    by_id = {instance.id: instance for instance in candidate}
    reference_ids = [instance.id for instance in reference]
    missing = [i for i in reference_ids if i not in by_id]
    extra = sorted(set(by_id) - set(reference_ids))
    duplicated = sorted(i for i, count in Counter(reference_ids).items() if count > 1)
    if missing or extra or duplicated or len(by_id) != len(candidate):
        raise IdMismatchError(
            'reference and candidate annotations must match one-to-one by id',
            missing_in_candidate=missing[:20], missing_in_reference=extra[:20],
            duplicated_in_reference=duplicated[:20])

    samples = []
    for ref in reference:
        cand = by_id[ref.id]
        if ref.box.width <= 0 or ref.box.height <= 0:
            raise InvalidBoxError(f'reference annotation {ref.id} has zero width or height')
        extents = (ref.box.width, ref.box.height, ref.box.width, ref.box.height)
        for boundary, ref_coord, cand_coord, extent in zip(BOUNDARY_ORDER, ref.box.to_list(),
                                                           cand.box.to_list(), extents):
            absolute = cand_coord - ref_coord
            samples.append(ErrorSample(ref.id, boundary, absolute / extent, absolute, extent))
    return samples


def _relative_by_boundary(samples: Sequence[ErrorSample]) -> Dict[Boundary, np.ndarray]:
    grouped = {boundary: [] for boundary in BOUNDARY_ORDER}
    for sample in samples:
        grouped[sample.boundary].append(sample.relative_error)
    return {boundary: np.asarray(values, dtype=float) for boundary, values in grouped.items()}


def boundary_stats(samples: Sequence[ErrorSample]) -> Dict[str, BoundaryStats]:
    """Mean, standard deviation and noise level per boundary and overall."""
    grouped = _relative_by_boundary(samples)
    grouped_named = {boundary.value: values for boundary, values in grouped.items()}
    grouped_named['overall'] = np.concatenate(list(grouped.values()))
    stats = {}
    for name, values in grouped_named.items():
        if values.size == 0:
            stats[name] = BoundaryStats(0, 0.0, 0.0, 0.0)
            continue
        stats[name] = BoundaryStats(
            count=int(values.size),
            mean=float(np.mean(values)),
            std=float(np.std(values)),
            gamma=float(np.sqrt(np.mean(np.square(values))))
        )
    return stats


def correlation_matrix(samples: Sequence[ErrorSample]) -> CorrelationResult:
    """Pearson correlation of relative errors between boundary pairs.

    Only instances with all four boundaries contribute. A zero-variance series
    gets 0 off the diagonal and is listed in ``zero_variance``.
    """
    per_instance: Dict[int, Dict[Boundary, float]] = {}
    for sample in samples:
        per_instance.setdefault(sample.instance_id, {})[sample.boundary] = sample.relative_error
    rows = [[errors[b] for b in BOUNDARY_ORDER]
            for errors in per_instance.values() if len(errors) == len(BOUNDARY_ORDER)]
    if len(rows) < 2:
        raise EmptyInputError('correlation needs at least two instances with all four boundaries')

    data = np.asarray(rows, dtype=float)
    centered = data - data.mean(axis=0)
    norms = np.sqrt(np.sum(centered ** 2, axis=0))
    degenerate = norms == 0.0
    safe = np.where(degenerate, 1.0, norms)
    matrix = (centered.T @ centered) / np.outer(safe, safe)
    matrix[degenerate, :] = 0.0
    matrix[:, degenerate] = 0.0
    matrix = np.clip((matrix + matrix.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(matrix, 1.0)

    zero_variance = [b.value for b, flag in zip(BOUNDARY_ORDER, degenerate) if flag]
    if zero_variance:
        logger.warning('zero-variance error series for %s; their correlations are reported as 0',
                       ', '.join(zero_variance))
    return CorrelationResult(matrix=matrix, n_instances=len(rows), zero_variance=zero_variance)


def scale_scatter(samples: Sequence[ErrorSample]) -> ScaleScatter:
    """(extent, absolute error) pairs and the slope of |error| vs extent through the origin."""
    if not samples:
        raise EmptyInputError('scale scatter needs at least one error sample')
    pairs = [(sample.object_extent, sample.absolute_error) for sample in samples]
    extents = np.array([p[0] for p in pairs], dtype=float)
    magnitudes = np.abs(np.array([p[1] for p in pairs], dtype=float))
    denominator = float(np.dot(extents, extents))
    slope = float(np.dot(extents, magnitudes) / denominator) if denominator > 0 else 0.0
    return ScaleScatter(pairs=pairs, slope=slope)
