import json
import logging

from flask import Blueprint, jsonify, request

from src.errors import SchemaError, ToolkitError
from src.models.run import RunRecord, db
from src.services.coco_io import dataset_to_dict, parse_dataset, parse_results, predictions_to_results
from src.services.pipeline import CommandResult, pipeline_service

logger = logging.getLogger(__name__)

pipeline_bp = Blueprint('pipeline', __name__)


def _body():
    data = request.get_json(silent=True)
    if not isinstance(data, dict):
        raise SchemaError('request body must be a JSON object')
    return data


def _require(data, key):
    if key not in data:
        raise SchemaError(f'missing required field {key!r}')
    return data[key]


def _config(data):
    config = data.get('config') or {}
    if not isinstance(config, dict):
        raise SchemaError('expected an object', path='$.config')
    return config


def _record(result: CommandResult):
    """Persist the run and return the stored record id."""
    report = result.report
    summary = {key: value for key, value in report.items() if key != 'config'}
    record = RunRecord(
        command=report['command'],
        config_json=json.dumps(report['config'], sort_keys=True),
        summary_json=json.dumps(summary, sort_keys=True)
    )
    db.session.add(record)
    db.session.commit()
    logger.info('stored run %s (%s)', record.id, record.command)
    return record.id


def _respond(result: CommandResult, **payload):
    run_id = _record(result)
    return jsonify(dict(payload, run_id=run_id, report=result.report)), 200


def _failure(command, error):
    if isinstance(error, ToolkitError):
        logger.warning('%s rejected: %s', command, error.message)
        return jsonify(error.to_dict()), error.http_status
    logger.exception('%s failed', command)
    db.session.rollback()
    return jsonify({'code': 'internal_error', 'message': f'Failed to run {command}: {str(error)}'}), 500


@pipeline_bp.route('/corrupt', methods=['POST'])
def corrupt():
    """Add synthetic location noise to the posted dataset."""
    try:
        data = _body()
        dataset = parse_dataset(_require(data, 'dataset'))
        result = pipeline_service.corrupt(dataset, {}, _config(data))
        return _respond(result, dataset=dataset_to_dict(result.dataset))
    except Exception as e:
        return _failure('corrupt', e)


@pipeline_bp.route('/correct', methods=['POST'])
def correct():
    """Correct the posted noisy dataset with the posted teacher predictions."""
    try:
        data = _body()
        dataset = parse_dataset(_require(data, 'dataset'))
        predictions = parse_results(_require(data, 'predictions'))
        result = pipeline_service.correct(dataset, predictions, {}, _config(data))
        return _respond(result, dataset=dataset_to_dict(result.dataset))
    except Exception as e:
        return _failure('correct', e)


@pipeline_bp.route('/simulate', methods=['POST'])
def simulate():
    try:
        data = _body()
        clean = parse_dataset(data['dataset']) if data.get('dataset') is not None else None
        include = bool(data.get('include_predictions'))
        result = pipeline_service.simulate({}, _config(data), clean=clean, include_predictions=include)
        payload = {}
        if include:
            payload['predictions'] = predictions_to_results(result.predictions)
        return _respond(result, **payload)
    except Exception as e:
        return _failure('simulate', e)


@pipeline_bp.route('/analyze', methods=['POST'])
def analyze():
    try:
        data = _body()
        reference = parse_dataset(_require(data, 'reference'))
        candidate = parse_dataset(_require(data, 'candidate'))
        result = pipeline_service.analyze(reference, candidate, {}, _config(data))
        return _respond(result)
    except Exception as e:
        return _failure('analyze', e)


@pipeline_bp.route('/eval-ap', methods=['POST'])
def eval_ap():
    try:
        data = _body()
        ground_truth = parse_dataset(_require(data, 'ground_truth'))
        predictions = parse_results(_require(data, 'predictions'))
        result = pipeline_service.eval_ap(ground_truth, predictions, {}, _config(data))
        return _respond(result)
    except Exception as e:
        return _failure('eval-ap', e)
