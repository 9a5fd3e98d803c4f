"""Command implementations shared by the CLI and the HTTP routes.

Every command resolves its effective configuration (flags > config file >
defaults), runs the computation and returns a JSON-ready report that echoes
that configuration.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from src.config import REPORT_SCHEMA_VERSION, merge_config
from src.errors import ConfigError, UsageError
from src.models.annotation import DatasetFile, Prediction
from src.services.ap_eval import COCO_THRESHOLDS, DEFAULT_MAX_DETS, evaluate_ap
from src.services.corrector import CorrectionConfig, correct_dataset
from src.services.metrics import boundary_stats, correlation_matrix, error_samples, scale_scatter
from src.services.noise import NoiseModel, corrupt_dataset_with_summary
from src.services.simulator import (SimConfig, SynthesisConfig, run_experiment, run_weight_sweep,
                                    simulate_teacher, synthesize_instances, synthetic_categories,
                                    synthetic_images)

logger = logging.getLogger(__name__)

CORRUPT_DEFAULTS = {'model': 'gaussian', 'gamma': None, 'seed': None, 'clip': False}
CORRECT_DEFAULTS = {'weight': 'step:0.7', 'iou_floor': 0.5, 'score_floor': 0.05, 'top_k': 1000}
EVAL_DEFAULTS = {'thresholds': list(COCO_THRESHOLDS), 'max_dets': DEFAULT_MAX_DETS, 'area_breakdown': True}
SIMULATE_DEFAULTS = {
    'seed': None,
    'instances': SynthesisConfig().to_dict(),
    'annotation_noise': {'model': 'gaussian', 'gamma': 0.1},
    'teacher': {},
    'correction': {},
    'sweep': False
}


@dataclass
class CommandResult:
    report: Dict[str, Any]
    dataset: Optional[DatasetFile] = None
    predictions: List[Prediction] = field(default_factory=list)
    rows: List[Dict[str, Any]] = field(default_factory=list)


def _report(command: str, config: Dict[str, Any], **body: Any) -> Dict[str, Any]:
    report = {'schema_version': REPORT_SCHEMA_VERSION, 'command': command, 'config': config}
    report.update(body)
    return report


def _require_seed(config: Dict[str, Any], command: str) -> int:
    seed = config.get('seed')
    if seed is None:
        raise UsageError(f'{command} is stochastic and needs an explicit --seed')
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError(f'seed must be an integer, got {seed!r}')
    return seed


class PipelineService:
    """Runs the five toolkit commands on in-memory datasets."""

    def corrupt(self, dataset: DatasetFile, flags: Dict[str, Any],
                file_values: Optional[Dict[str, Any]] = None) -> CommandResult:
        config = merge_config(CORRUPT_DEFAULTS, file_values or {}, flags)
        seed = _require_seed(config, 'corrupt')
        if config.get('gamma') is None:
            raise UsageError('corrupt needs --gamma')
        model = NoiseModel.parse(config['model'], config['gamma'])
        image_sizes = dataset.image_sizes() if config.get('clip') else None

        corrupted, summary = corrupt_dataset_with_summary(dataset.annotations, model, seed, image_sizes=image_sizes)
        config = dict(config, model=model.kind.value, gamma=model.gamma)
        report = _report('corrupt', config, summary=summary.to_dict())
        return CommandResult(report=report, dataset=dataset.with_annotations(corrupted))

    def correct(self, dataset: DatasetFile, predictions: List[Prediction], flags: Dict[str, Any],
                file_values: Optional[Dict[str, Any]] = None) -> CommandResult:
        config = merge_config(CORRECT_DEFAULTS, file_values or {}, flags)
        cfg = CorrectionConfig.from_dict(config)
        image_ids = dataset.image_ids if dataset.images else None

        corrected, correction = correct_dataset(dataset.annotations, predictions, cfg, image_ids=image_ids)
        report = _report('correct', cfg.to_dict(), n_predictions=len(predictions),
                         summary=correction.to_dict())
        rows = [row.to_dict() for row in correction.rows]
        return CommandResult(report=report, dataset=dataset.with_annotations(corrected), rows=rows)

    def simulate(self, flags: Dict[str, Any], file_values: Optional[Dict[str, Any]] = None,
                 clean: Optional[DatasetFile] = None, include_predictions: bool = False) -> CommandResult:
        """Run the experiment; the simulated predictions are only built when asked for."""
        config = merge_config(SIMULATE_DEFAULTS, file_values or {}, flags)
        seed = _require_seed(config, 'simulate')
        teacher = dict(config.get('teacher') or {})
        teacher.setdefault('seed', seed)
        sim = SimConfig.from_dict(teacher)
        ann_noise = NoiseModel.from_dict(config.get('annotation_noise') or {})
        cfg = CorrectionConfig.from_dict(config.get('correction') or {})

        if clean is None:
            synthesis = SynthesisConfig.from_dict(config.get('instances') or {})
            instances = synthesize_instances(synthesis, seed)
            clean = DatasetFile(images=synthetic_images(instances, synthesis), annotations=instances,
                                categories=synthetic_categories(synthesis))
        else:
            config['instances'] = {'dataset': 'provided', 'n_instances': len(clean.annotations)}
            instances = clean.annotations

        effective = dict(config, teacher=sim.to_dict(), annotation_noise=ann_noise.to_dict(),
                         correction=cfg.to_dict())
        experiment = run_experiment(instances, ann_noise, sim, cfg, seed)
        body = {'experiment': experiment.to_dict()}
        if config.get('sweep'):
            sweep = run_weight_sweep(instances, ann_noise, sim, seed, base=cfg)
            body['sweep'] = {label: result.to_dict() for label, result in sweep.items()}

        predictions = simulate_teacher(instances, sim) if include_predictions else []
        return CommandResult(report=_report('simulate', effective, **body), dataset=clean,
                             predictions=predictions, rows=experiment.rows)

    def analyze(self, reference: DatasetFile, candidate: DatasetFile, flags: Dict[str, Any],
                file_values: Optional[Dict[str, Any]] = None) -> CommandResult:
        config = merge_config({}, file_values or {}, flags)
        samples = error_samples(reference.annotations, candidate.annotations)
        stats = boundary_stats(samples)
        body = {
            'n_instances': len(reference.annotations),
            'noise_level': {name: entry.gamma for name, entry in stats.items()},
            'boundaries': {name: entry.to_dict() for name, entry in stats.items()}
        }
        if len(reference.annotations) >= 2:
            body['correlation'] = correlation_matrix(samples).to_dict()
        if samples:
            body['scale_scatter'] = scale_scatter(samples).to_dict()
        rows = [{'instance_id': s.instance_id, 'boundary': s.boundary.value, 'relative_error': s.relative_error,
                 'absolute_error': s.absolute_error, 'object_extent': s.object_extent} for s in samples]
        return CommandResult(report=_report('analyze', config, **body), rows=rows)

    def eval_ap(self, ground_truth: DatasetFile, predictions: List[Prediction], flags: Dict[str, Any],
                file_values: Optional[Dict[str, Any]] = None) -> CommandResult:
        config = merge_config(EVAL_DEFAULTS, file_values or {}, flags)
        categories = ground_truth.category_ids or None
        result = evaluate_ap(predictions, ground_truth.annotations, thresholds=config['thresholds'],
                             categories=categories, max_dets=config.get('max_dets'),
                             area_breakdown=bool(config.get('area_breakdown')))
        return CommandResult(report=_report('eval-ap', config, n_predictions=len(predictions), ap=result.to_dict()))


pipeline_service = PipelineService()
