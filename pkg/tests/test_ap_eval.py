import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.errors import ConfigError
from src.models.annotation import Instance, Prediction
from src.models.box import BBox
from src.services.ap_eval import COCO_THRESHOLDS, evaluate_ap


def test_coco_thresholds():
    assert COCO_THRESHOLDS == (0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95)


def test_perfect_predictions(make_instance, make_prediction):
    gts = [make_instance(1, (0, 0, 10, 10)), make_instance(2, (20, 20, 60, 50), image_id=2, category_id=2)]
    predictions = [make_prediction((0, 0, 10, 10), 1.0), make_prediction((20, 20, 60, 50), 1.0, 2, 2)]
    result = evaluate_ap(predictions, gts)
    assert all(ap == 1.0 for ap in result.per_threshold.values())
    assert result.mAP == 1.0
    assert result.per_category == {1: 1.0, 2: 1.0}


def test_no_predictions(make_instance):
    result = evaluate_ap([], [make_instance(1, (0, 0, 10, 10))])
    assert result.mAP == 0.0
    assert all(ap == 0.0 for ap in result.per_threshold.values())


def test_true_positive_ranked_before_false_positive(make_instance, make_prediction):
    gt = make_instance(1, (0, 0, 100, 100))
    predictions = [make_prediction((0, 0, 100, 90), 0.9),        # IoU 0.9
                   make_prediction((200, 200, 250, 250), 0.8)]   # disjoint
    result = evaluate_ap(predictions, [gt], thresholds=[0.5])
    assert result.ap_at(0.5) == 1.0


def test_false_positive_ranked_first(make_instance, make_prediction):
    gts = [make_instance(1, (0, 0, 10, 10)), make_instance(2, (50, 50, 60, 60))]
    predictions = [make_prediction((100, 100, 110, 110), 0.9),
                   make_prediction((0, 0, 10, 10), 0.8),
                   make_prediction((50, 50, 60, 60), 0.7)]
    # Precision 0, 1/2, 2/3 at recall 0, 1/2, 1: interpolated precision is 2/3 everywhere.
    result = evaluate_ap(predictions, gts, thresholds=[0.5])
    assert result.ap_at(0.5) == pytest.approx(2 / 3)


def test_false_positive_between_true_positives(make_instance, make_prediction):
    gts = [make_instance(1, (0, 0, 10, 10)), make_instance(2, (50, 50, 60, 60))]
    predictions = [make_prediction((0, 0, 10, 10), 0.9),
                   make_prediction((100, 100, 110, 110), 0.8),
                   make_prediction((50, 50, 60, 60), 0.7)]
    # 51 recall points up to 0.5 see precision 1, the remaining 50 see 2/3.
    result = evaluate_ap(predictions, gts, thresholds=[0.5])
    assert result.ap_at(0.5) == pytest.approx((51 + 50 * 2 / 3) / 101)


def test_duplicate_detection_is_false_positive(make_instance, make_prediction):
    gt = make_instance(1, (0, 0, 10, 10))
    predictions = [make_prediction((0, 0, 10, 10), 0.9), make_prediction((0, 0, 10, 10), 0.8)]
    result = evaluate_ap(predictions, [gt], thresholds=[0.5])
    assert result.ap_at(0.5) == 1.0


def test_greedy_match_prefers_highest_iou(make_instance, make_prediction):
    gts = [make_instance(1, (0, 0, 10, 10)), make_instance(2, (2, 0, 12, 10))]
    # The first detection overlaps gt 2 best, leaving gt 1 for the second detection.
    predictions = [make_prediction((2, 0, 12, 10), 0.9), make_prediction((0, 0, 10, 10), 0.8)]
    result = evaluate_ap(predictions, gts, thresholds=[0.9])
    assert result.ap_at(0.9) == 1.0


def test_crowd_ground_truth_excluded(make_instance, make_prediction):
    gts = [make_instance(1, (0, 0, 10, 10)), make_instance(2, (50, 50, 90, 90), iscrowd=True)]
    result = evaluate_ap([make_prediction((0, 0, 10, 10), 0.9)], gts, thresholds=[0.5])
    assert result.ap_at(0.5) == 1.0


def test_unknown_categories_ignored(make_instance, make_prediction):
    gt = make_instance(1, (0, 0, 10, 10))
    predictions = [make_prediction((0, 0, 10, 10), 0.9), make_prediction((0, 0, 10, 10), 0.95, category_id=7)]
    result = evaluate_ap(predictions, [gt], thresholds=[0.5])
    assert result.ap_at(0.5) == 1.0
    assert result.ignored_predictions == 1


def test_max_dets_caps_detections_per_image(make_instance, make_prediction):
    gt = make_instance(1, (0, 0, 10, 10))
    predictions = [make_prediction((30, 30, 40, 40), 0.9), make_prediction((0, 0, 10, 10), 0.8)]
    assert evaluate_ap(predictions, [gt], thresholds=[0.5], max_dets=1).ap_at(0.5) == 0.0
    assert evaluate_ap(predictions, [gt], thresholds=[0.5], max_dets=2).ap_at(0.5) == pytest.approx(0.5)


def test_area_breakdown(make_instance, make_prediction):
    gts = [make_instance(1, (0, 0, 10, 10)), make_instance(2, (0, 0, 200, 200), image_id=2)]
    predictions = [make_prediction((0, 0, 10, 10), 0.9), make_prediction((300, 300, 400, 400), 0.8, image_id=2)]
    result = evaluate_ap(predictions, gts, thresholds=[0.5], area_breakdown=True)
    assert result.by_area['small'] == 1.0
    assert result.by_area['large'] == 0.0


def test_report_keys(make_instance, make_prediction):
    result = evaluate_ap([make_prediction((0, 0, 10, 10), 1.0)], [make_instance(1, (0, 0, 10, 10))])
    payload = result.to_dict()
    assert payload['per_threshold']['0.50'] == 1.0
    assert payload['AP50'] == 1.0 and payload['AP75'] == 1.0
    assert payload['per_category'] == {'1': 1.0}


@pytest.mark.parametrize('thresholds', [[], [0.7, 0.5], [0.5, 0.5], [0.5, 1.2]])
def test_threshold_validation(thresholds):
    with pytest.raises(ConfigError):
        evaluate_ap([], [], thresholds=thresholds)


def _grid_scenario(seed):
    """Ground truth in disjoint grid cells, detections confined to their cell."""
    rng = np.random.default_rng(seed)
    cell = 100.0
    gts, predictions = [], []
    next_id = 1
    for image_id in range(1, int(rng.integers(1, 4)) + 1):
        for row in range(3):
            for col in range(3):
                ox, oy = col * cell, row * cell
                category = int(rng.integers(1, 3))
                if rng.uniform() < 0.7:
                    x, y = rng.uniform(5, 45, size=2)
                    w, h = rng.uniform(20, 50, size=2)
                    gts.append(Instance(next_id, image_id, category, BBox(ox + x, oy + y, ox + x + w, oy + y + h)))
                    next_id += 1
                for _ in range(int(rng.integers(0, 4))):
                    x, y = rng.uniform(0, 50, size=2)
                    w, h = rng.uniform(10, 50, size=2)
                    box = BBox(ox + x, oy + y, ox + x + w, oy + y + h)
                    score = float(np.round(rng.uniform(0.05, 1.0), 2))
                    predictions.append(Prediction(image_id, box, {category: score}))
    return gts, predictions


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_ap_non_increasing_in_threshold(seed):
    gts, predictions = _grid_scenario(seed)
    result = evaluate_ap(predictions, gts, categories=[1, 2])
    values = [result.per_threshold[t] for t in COCO_THRESHOLDS]
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_ap_invariant_to_monotone_score_transform(seed):
    gts, predictions = _grid_scenario(seed)
    transformed = [Prediction(p.image_id, p.box, {c: s ** 3 * 0.5 + 0.1 for c, s in p.scores.items()})
                   for p in predictions]
    original = evaluate_ap(predictions, gts, categories=[1, 2])
    assert evaluate_ap(transformed, gts, categories=[1, 2]).per_threshold == original.per_threshold
