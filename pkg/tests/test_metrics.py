import math

import numpy as np
import pytest

from src.errors import EmptyInputError, IdMismatchError
from src.models.annotation import Instance
from src.models.box import BBox
from src.services.metrics import (Boundary, ErrorSample, boundary_stats, correlation_matrix, error_samples,
                                  scale_scatter)
from src.services.noise import NoiseKind, NoiseModel, corrupt_dataset, estimate_noise_level


def _series(left, top, right, bottom):
    samples = []
    for index, values in enumerate(zip(left, top, right, bottom)):
        for boundary, value in zip(Boundary, values):
            samples.append(ErrorSample(index, boundary, value, value * 10.0, 10.0))
    return samples


def test_identical_sets_have_zero_error(make_instance):
    reference = [make_instance(i, (i, 0, i + 20, 30)) for i in range(3)]
    samples = error_samples(reference, list(reversed(reference)))
    assert len(samples) == 12
    assert all(s.relative_error == 0.0 and s.absolute_error == 0.0 for s in samples)


def test_left_shift_error(make_instance):
    samples = error_samples([make_instance(1, (0, 0, 100, 100))], [make_instance(1, (5, 0, 100, 100))])
    by_boundary = {s.boundary: s for s in samples}
    assert by_boundary[Boundary.LEFT].relative_error == pytest.approx(0.05)
    assert by_boundary[Boundary.LEFT].absolute_error == 5
    assert all(by_boundary[b].relative_error == 0 for b in (Boundary.TOP, Boundary.RIGHT, Boundary.BOTTOM))


def test_relative_error_normalised_by_extent(make_instance):
    samples = error_samples([make_instance(1, (0, 0, 200, 50))], [make_instance(1, (0, 5, 200, 50))])
    top = next(s for s in samples if s.boundary is Boundary.TOP)
    assert top.relative_error == pytest.approx(0.1)
    assert top.object_extent == 50


@pytest.mark.parametrize('candidate_ids', [[1], [1, 2, 3], [1, 4]])
def test_id_mismatch_rejected(make_instance, candidate_ids):
    reference = [make_instance(i, (0, 0, 10, 10)) for i in (1, 2)]
    candidate = [make_instance(i, (0, 0, 10, 10)) for i in candidate_ids]
    with pytest.raises(IdMismatchError):
        error_samples(reference, candidate)


def test_duplicate_reference_id_rejected(make_instance):
    reference = [make_instance(1, (0, 0, 10, 10)), make_instance(1, (0, 0, 20, 20))]
    with pytest.raises(IdMismatchError) as info:
        error_samples(reference, [make_instance(1, (0, 0, 10, 10))])
    assert info.value.details['duplicated_in_reference'] == [1]


def test_noise_level_recovered_from_corruption(make_instance):
    rng = np.random.default_rng(3)
    reference = []
    for i in range(2000):
        x, y = rng.uniform(0, 300, size=2)
        w, h = rng.uniform(20, 200, size=2)
        reference.append(make_instance(i, (x, y, x + w, y + h)))
    noisy = corrupt_dataset(reference, NoiseModel(NoiseKind.GAUSSIAN, 0.1), 5)
    samples = error_samples(reference, noisy)
    assert estimate_noise_level([s.relative_error for s in samples]) == pytest.approx(0.1, rel=0.05)
    stats = boundary_stats(samples)
    assert stats['overall'].count == 8000
    assert stats['left'].gamma == pytest.approx(0.1, rel=0.07)


def test_correlation_identical_and_opposite_series():
    rng = np.random.default_rng(0)
    base = rng.normal(size=50)
    result = correlation_matrix(_series(base, base, -base, rng.normal(size=50)))
    assert result.matrix[0, 1] == pytest.approx(1.0)
    assert result.matrix[0, 2] == pytest.approx(-1.0)
    np.testing.assert_allclose(result.matrix, result.matrix.T)
    np.testing.assert_array_equal(np.diag(result.matrix), np.ones(4))
    assert np.all(np.abs(result.matrix) <= 1.0)


def test_correlation_zero_variance_flagged():
    rng = np.random.default_rng(1)
    result = correlation_matrix(_series(rng.normal(size=20), np.zeros(20), rng.normal(size=20), rng.normal(size=20)))
    assert result.zero_variance == ['top']
    assert result.matrix[1, 0] == 0.0 and result.matrix[1, 1] == 1.0
    assert result.to_dict()['boundaries'] == ['left', 'top', 'right', 'bottom']


def test_correlation_needs_two_instances():
    with pytest.raises(EmptyInputError):
        correlation_matrix(_series([0.1], [0.2], [0.3], [0.4]))


def test_independent_noise_is_uncorrelated():
    n = 100_000
    offsets = NoiseModel(NoiseKind.GAUSSIAN, 0.1).sample_relative_offsets(np.random.default_rng(9), n)
    reference = BBox(0.0, 0.0, 100.0, 100.0)
    ref_instances = [Instance(i, 1, 1, reference) for i in range(n)]
    candidates = [Instance(i, 1, 1, BBox.clamped(*(reference.as_array() + 100.0 * row))[0])
                  for i, row in enumerate(offsets)]
    matrix = correlation_matrix(error_samples(ref_instances, candidates)).matrix
    off_diagonal = matrix[~np.eye(4, dtype=bool)]
    assert np.max(np.abs(off_diagonal)) < 0.02


@pytest.mark.parametrize(
    ('extents', 'errors', 'slope'),
    [
        ([10.0, 20.0, 40.0], [0.0, 0.0, 0.0], 0.0),
        ([10.0, 20.0, 40.0], [1.0, -2.0, 4.0], 0.1),
    ],
)
def test_scale_scatter_exact(extents, errors, slope):
    samples = [ErrorSample(i, Boundary.LEFT, e / x, e, x) for i, (x, e) in enumerate(zip(extents, errors))]
    result = scale_scatter(samples)
    assert result.slope == pytest.approx(slope)
    assert result.pairs == list(zip(extents, errors))


def test_scale_scatter_half_normal_slope(make_instance):
    rng = np.random.default_rng(11)
    reference = []
    for i in range(5000):
        w = h = rng.uniform(20, 300)
        reference.append(make_instance(i, (0.0, 0.0, w, h)))
    noisy = corrupt_dataset(reference, NoiseModel(NoiseKind.GAUSSIAN, 0.1), 12)
    result = scale_scatter(error_samples(reference, noisy))
    assert result.slope == pytest.approx(0.1 * math.sqrt(2 / math.pi), rel=0.03)


def test_scale_scatter_rejects_empty():
    with pytest.raises(EmptyInputError):
        scale_scatter([])
