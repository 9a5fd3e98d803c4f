from flask import Blueprint, jsonify, request

from src.models.run import RunRecord

runs_bp = Blueprint('runs', __name__)


@runs_bp.route('/runs', methods=['GET'])
def list_runs():
    """Stored runs, newest first, optionally filtered by ``?command=``."""
    try:
        query = RunRecord.query
        command = request.args.get('command')
        if command:
            query = query.filter_by(command=command)
        limit = request.args.get('limit', 50, type=int)
        runs = query.order_by(RunRecord.id.desc()).limit(max(1, min(limit, 500))).all()

        return jsonify({
            'runs': [run.to_dict() for run in runs],
            'total': len(runs)
        }), 200

    except Exception as e:
        return jsonify({'code': 'internal_error', 'message': f'Failed to list runs: {str(e)}'}), 500


@runs_bp.route('/runs/<int:run_id>', methods=['GET'])
def get_run(run_id):
    run = RunRecord.query.get(run_id)
    if not run:
        return jsonify({'code': 'not_found', 'message': 'Run not found'}), 404
    return jsonify({'run': run.to_dict()}), 200
