import json
import os

import pytest

from src.errors import DanglingReferenceError, SchemaError, ScoreRangeError
from src.models.box import BBox
from src.services.coco_io import (dataset_to_dict, dumps, load_dataset, load_results, parse_dataset, parse_results,
                                  predictions_to_results, save_dataset, write_json)


def test_minimal_dataset_loads(fixture_path):
    dataset = load_dataset(fixture_path('minimal_dataset.json'))
    assert dataset.annotations == []
    assert dataset.image_ids == [1]
    assert dataset.category_ids == [1]


def test_small_dataset_converts_boxes(fixture_path):
    dataset = load_dataset(fixture_path('small_dataset.json'))
    boxes = {a.id: a.box for a in dataset.annotations}
    assert boxes[1] == BBox(10, 20, 110, 70)
    assert boxes[2] == BBox(10.5, 20.25, 16.0, 22.25)
    assert dataset.annotations[2].iscrowd
    assert dataset.annotations[0].extra == {'area': 5000}


def test_dangling_image_reference_names_annotation(fixture_path):
    with pytest.raises(DanglingReferenceError) as info:
        load_dataset(fixture_path('dangling_dataset.json'))
    assert 'annotation 7' in info.value.message
    assert info.value.details['annotation_id'] == 7


def test_canonical_save_matches_golden(fixture_path, tmp_path):
    out = tmp_path / 'saved.json'
    save_dataset(load_dataset(fixture_path('small_dataset.json')), str(out), canonical=True)
    with open(fixture_path('small_dataset_canonical.json'), 'rb') as handle:
        golden = handle.read()
    assert out.read_bytes() == golden


def test_round_trip_is_a_fixpoint(fixture_path, tmp_path):
    first = tmp_path / 'first.json'
    second = tmp_path / 'second.json'
    save_dataset(load_dataset(fixture_path('small_dataset.json')), str(first))
    save_dataset(load_dataset(str(first)), str(second))
    assert json.loads(first.read_text()) == json.loads(second.read_text())
    assert load_dataset(str(second)).annotations == load_dataset(str(first)).annotations


def test_unknown_fields_preserved(fixture_path):
    with open(fixture_path('small_dataset.json'), encoding='utf-8') as handle:
        raw = json.load(handle)
    payload = dataset_to_dict(parse_dataset(raw))
    assert payload['info'] == {'description': 'fixture'}
    assert payload['annotations'][2]['segmentation'] == []
    assert payload['annotations'][0]['area'] == 5000


@pytest.mark.parametrize(
    ('document', 'path'),
    [
        ([], '$'),
        ({'images': {}}, '$.images'),
        ({'images': [{'id': 1}], 'categories': [{'id': 1}],
          'annotations': [{'id': 1, 'image_id': 1, 'category_id': 1, 'bbox': [0, 0, 1]}]}, '$.annotations[0].bbox'),
        ({'images': [{'id': 1}], 'categories': [{'id': 1}],
          'annotations': [{'id': 1, 'image_id': 1, 'category_id': 1, 'bbox': [0, 0, -1, 1]}]}, '$.annotations[0].bbox'),
        ({'images': [{'id': 1}], 'categories': [{'id': 1}],
          'annotations': [{'id': 1, 'image_id': 1, 'bbox': [0, 0, 1, 1]}]}, '$.annotations[0]'),
        ({'images': [{'id': 1}, {'id': 1}], 'categories': []}, '$.images[1].id'),
        ({'images': [{'id': 1}], 'categories': [{'id': 1}],
          'annotations': [{'id': 1, 'image_id': 1, 'category_id': 1, 'bbox': [0, 0, 1, 1]},
                          {'id': 1, 'image_id': 1, 'category_id': 1, 'bbox': [0, 0, 1, 1]}]}, '$.annotations[1].id'),
    ],
)
def test_schema_errors_carry_json_path(document, path):
    with pytest.raises(SchemaError) as info:
        parse_dataset(document)
    assert info.value.details['path'] == path


def test_invalid_json_file(tmp_path):
    bad = tmp_path / 'bad.json'
    bad.write_text('{"images": [', encoding='utf-8')
    with pytest.raises(SchemaError):
        load_dataset(str(bad))


def test_missing_file_is_schema_error(tmp_path):
    with pytest.raises(SchemaError):
        load_dataset(str(tmp_path / 'nope.json'))


def test_empty_results(fixture_path):
    assert load_results(fixture_path('empty_results.json')) == []


def test_score_out_of_range(fixture_path):
    with pytest.raises(ScoreRangeError) as info:
        load_results(fixture_path('bad_score_results.json'))
    assert info.value.details['path'] == '$[0].score'


def test_results_fixture_converted_to_corners(fixture_path):
    predictions = load_results(fixture_path('results_3.json'))
    assert [p.box for p in predictions] == [BBox(10, 20, 110, 70), BBox(12.5, 20, 16.5, 23), BBox(0, 0, 40, 30)]
    assert [p.scores for p in predictions] == [{1: 0.9}, {2: 0.5}, {1: 0.25}]
    assert [p.image_id for p in predictions] == [1, 1, 2]


def test_results_round_trip(fixture_path):
    with open(fixture_path('results_3.json'), encoding='utf-8') as handle:
        raw = json.load(handle)
    assert predictions_to_results(parse_results(raw)) == raw


def test_canonical_dumps_is_stable():
    assert dumps({'b': 1, 'a': [1, 2]}, canonical=True) == '{\n  "a": [\n    1,\n    2\n  ],\n  "b": 1\n}\n'


def test_write_json_leaves_no_temp_files(tmp_path):
    target = tmp_path / 'nested' / 'out.json'
    write_json(str(target), {'x': 1})
    assert json.loads(target.read_text()) == {'x': 1}
    assert os.listdir(target.parent) == ['out.json']
