"""COCO annotation and results files.

Boxes are stored as [x, y, w, h] on disk and converted to corner form on
load. Unknown fields are carried through verbatim so a load/save round trip
loses nothing.
"""

import json
import logging
import math
import os
import tempfile
from typing import Any, Dict, List, Sequence

from src.errors import DanglingReferenceError, InvalidBoxError, SchemaError, ScoreRangeError
from src.models.annotation import DatasetFile, Instance, Prediction
from src.models.box import BBox

logger = logging.getLogger(__name__)

_ANNOTATION_KEYS = ('id', 'image_id', 'category_id', 'bbox', 'iscrowd')


def _read_json(path: str) -> Any:
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            return json.load(handle)
    except FileNotFoundError:
        raise SchemaError(f'file not found: {path}') from None
    except UnicodeDecodeError as e:
        raise SchemaError(f'{path} is not UTF-8: {e}') from None
    except json.JSONDecodeError as e:
        raise SchemaError(f'{path} is not valid JSON: {e.msg} (line {e.lineno}, column {e.colno})') from None


def _require_int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f'expected an integer, got {value!r}', path=path)
    return value


def _require_number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise SchemaError(f'expected a finite number, got {value!r}', path=path)
    return value


def _parse_bbox(value: Any, path: str) -> BBox:
    if not isinstance(value, list) or len(value) != 4:
        raise SchemaError(f'expected [x, y, w, h], got {value!r}', path=path)
    x, y, w, h = (_require_number(v, f'{path}[{i}]') for i, v in enumerate(value))
    try:
        return BBox.from_xywh(x, y, w, h)
    except InvalidBoxError as e:
        raise SchemaError(e.message, path=path) from None


def _parse_instance(entry: Any, path: str) -> Instance:
    if not isinstance(entry, dict):
        raise SchemaError('expected an object', path=path)
    for key in ('id', 'image_id', 'category_id', 'bbox'):
        if key not in entry:
            raise SchemaError(f'missing required field {key!r}', path=path)
    iscrowd = entry.get('iscrowd', 0)
    if iscrowd not in (0, 1, True, False):
        raise SchemaError(f'iscrowd must be 0 or 1, got {iscrowd!r}', path=f'{path}.iscrowd')
    return Instance(
        id=_require_int(entry['id'], f'{path}.id'),
        image_id=_require_int(entry['image_id'], f'{path}.image_id'),
        category_id=_require_int(entry['category_id'], f'{path}.category_id'),
        box=_parse_bbox(entry['bbox'], f'{path}.bbox'),
        iscrowd=bool(iscrowd),
        extra={key: value for key, value in entry.items() if key not in _ANNOTATION_KEYS}
    )


def _parse_records(data: Dict, key: str) -> List[Dict]:
    records = data.get(key, [])
    if not isinstance(records, list):
        raise SchemaError('expected a list', path=f'$.{key}')
    seen = set()
    for index, record in enumerate(records):
        path = f'$.{key}[{index}]'
        if not isinstance(record, dict) or 'id' not in record:
            raise SchemaError("expected an object with an 'id'", path=path)
        record_id = _require_int(record['id'], f'{path}.id')
        if record_id in seen:
            raise SchemaError(f'duplicate id {record_id}', path=f'{path}.id')
        seen.add(record_id)
    return records


def parse_dataset(data: Any) -> DatasetFile:
    """Validate a decoded COCO annotation document."""
    if not isinstance(data, dict):
        raise SchemaError('expected a JSON object at the top level')
    images = _parse_records(data, 'images')
    categories = _parse_records(data, 'categories')
    raw_annotations = data.get('annotations', [])
    if not isinstance(raw_annotations, list):
        raise SchemaError('expected a list', path='$.annotations')

    image_ids = {image['id'] for image in images}
    category_ids = {category['id'] for category in categories}
    annotations = []
    seen = set()
    for index, entry in enumerate(raw_annotations):
        instance = _parse_instance(entry, f'$.annotations[{index}]')
        if instance.id in seen:
            raise SchemaError(f'duplicate annotation id {instance.id}', path=f'$.annotations[{index}].id')
        seen.add(instance.id)
        if instance.image_id not in image_ids:
            raise DanglingReferenceError(
                f'annotation {instance.id} references unknown image_id {instance.image_id}',
                annotation_id=instance.id, path=f'$.annotations[{index}].image_id')
        if instance.category_id not in category_ids:
            raise DanglingReferenceError(
                f'annotation {instance.id} references unknown category_id {instance.category_id}',
                annotation_id=instance.id, path=f'$.annotations[{index}].category_id')
        annotations.append(instance)

    extra = {key: value for key, value in data.items() if key not in ('images', 'annotations', 'categories')}
    return DatasetFile(images=images, annotations=annotations, categories=categories, extra=extra)


def instance_to_dict(instance: Instance) -> Dict:
    entry = {
        'id': instance.id,
        'image_id': instance.image_id,
        'category_id': instance.category_id,
        'bbox': list(instance.box.to_xywh()),
        'iscrowd': int(instance.iscrowd)
    }
    entry.update(instance.extra)
    return entry


def dataset_to_dict(dataset: DatasetFile) -> Dict:
    payload = dict(dataset.extra)
    payload['images'] = list(dataset.images)
    payload['annotations'] = [instance_to_dict(instance) for instance in dataset.annotations]
    payload['categories'] = list(dataset.categories)
    return payload


def load_dataset(path: str) -> DatasetFile:
    dataset = parse_dataset(_read_json(path))
    logger.info('loaded %s: %d images, %d annotations, %d categories', path,
                len(dataset.images), len(dataset.annotations), len(dataset.categories))
    return dataset


def save_dataset(dataset: DatasetFile, path: str, canonical: bool = False) -> None:
    write_json(path, dataset_to_dict(dataset), canonical=canonical)


def parse_results(data: Any) -> List[Prediction]:
    """Validate a decoded COCO results list."""
    if not isinstance(data, list):
        raise SchemaError('expected a JSON list of detections')
    predictions = []
    for index, entry in enumerate(data):
        path = f'$[{index}]'
        if not isinstance(entry, dict):
            raise SchemaError('expected an object', path=path)
        for key in ('image_id', 'category_id', 'bbox', 'score'):
            if key not in entry:
                raise SchemaError(f'missing required field {key!r}', path=path)
        score = _require_number(entry['score'], f'{path}.score')
        if not 0.0 <= score <= 1.0:
            raise ScoreRangeError(f'score {score} outside [0, 1]', path=f'{path}.score')
        predictions.append(Prediction(
            image_id=_require_int(entry['image_id'], f'{path}.image_id'),
            box=_parse_bbox(entry['bbox'], f'{path}.bbox'),
            scores={_require_int(entry['category_id'], f'{path}.category_id'): float(score)}
        ))
    return predictions


def load_results(path: str) -> List[Prediction]:
    predictions = parse_results(_read_json(path))
    logger.info('loaded %d predictions from %s', len(predictions), path)
    return predictions


def predictions_to_results(predictions: Sequence[Prediction]) -> List[Dict]:
    """One results entry per (prediction, category) pair."""
    results = []
    for prediction in predictions:
        for category_id, score in prediction.scores.items():
            results.append({
                'image_id': prediction.image_id,
                'category_id': category_id,
                'bbox': list(prediction.box.to_xywh()),
                'score': score
            })
    return results


def dumps(payload: Any, canonical: bool = False) -> str:
    """Serialise; the canonical form sorts keys and fixes indentation."""
    if canonical:
        return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + '\n'
    return json.dumps(payload, ensure_ascii=False, allow_nan=False)


def write_json(path: str, payload: Any, canonical: bool = False) -> None:
    write_text(path, dumps(payload, canonical=canonical))


def write_text(path: str, text: str) -> None:
    """Write atomically: temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(prefix='.tmp-', dir=directory)
    try:
        with os.fdopen(fd, 'w', encoding='utf-8') as handle:
            handle.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
