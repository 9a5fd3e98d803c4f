"""Command-line surface: corrupt, correct, simulate, analyze, eval-ap.

Exit codes: 0 success, 1 usage error, 2 data error. Failures are written to
stderr as one JSON line with ``code`` and ``message``.
"""

import argparse
import json
import logging
import os
import sys
from typing import Any, Dict, List, Optional

# Allow `python src/cli.py` as well as `python -m src.cli`.
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import pandas as pd

from src.config import load_config_file
from src.errors import ToolkitError, UsageError, error_payload
from src.services.coco_io import (dataset_to_dict, dumps, load_dataset, load_results, predictions_to_results,
                                  write_json, write_text)
from src.services.pipeline import CommandResult, pipeline_service

logger = logging.getLogger('src.cli')


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f'{self.prog}: {message}')


def _thresholds(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected comma-separated numbers, got {text!r}')


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='boxfix', description='Synthesize and correct box-annotation noise.')
    parser.add_argument('--log-level', default='WARNING',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], help='stderr log level')
    commands = parser.add_subparsers(dest='command', required=True, parser_class=_Parser)

    corrupt = commands.add_parser('corrupt', help='add synthetic location noise to a COCO dataset')
    corrupt.add_argument('--ann', required=True, help='clean COCO annotation file')
    corrupt.add_argument('--model', choices=['gaussian', 'exp-enclosing', 'exp-enclosed'])
    corrupt.add_argument('--gamma', type=float, help='noise level (RMS relative boundary error)')
    corrupt.add_argument('--seed', type=int)
    corrupt.add_argument('--clip', action='store_true', default=None, help='clip noisy boxes to image bounds')
    corrupt.add_argument('--out', required=True, help='noisy COCO annotation file to write')
    corrupt.add_argument('--report', help='write the summary here instead of stdout')
    corrupt.add_argument('--config', help='JSON file with defaults for the flags above')

    correct = commands.add_parser('correct', help='correct noisy boxes with teacher predictions')
    correct.add_argument('--ann', required=True, help='noisy COCO annotation file')
    correct.add_argument('--preds', required=True, help='COCO results file of teacher predictions')
    correct.add_argument('--weight', help='step:TAU, gauss:ALPHA, step-only:TAU or score')
    correct.add_argument('--iou-floor', dest='iou_floor', type=float)
    correct.add_argument('--score-floor', dest='score_floor', type=float)
    correct.add_argument('--top-k', dest='top_k', type=int)
    correct.add_argument('--out', required=True, help='corrected COCO annotation file to write')
    correct.add_argument('--report', help='write the correction report here instead of stdout')
    correct.add_argument('--csv', help='per-instance correction rows')
    correct.add_argument('--config')

    simulate = commands.add_parser('simulate', help='run a corrupt -> correct experiment with a simulated teacher')
    simulate.add_argument('--config', help='experiment JSON file')
    simulate.add_argument('--seed', type=int)
    simulate.add_argument('--ann', help='clean COCO file to use instead of synthesized instances')
    simulate.add_argument('--sweep', action='store_true', default=None, help='also run every weight function')
    simulate.add_argument('--out', required=True, help='experiment report')
    simulate.add_argument('--csv', help='per-instance rows')
    simulate.add_argument('--predictions-out', dest='predictions_out',
                          help='write the simulated teacher predictions as a COCO results file')
    simulate.add_argument('--dataset-out', dest='dataset_out', help='write the clean dataset used')

    analyze = commands.add_parser('analyze', help='boundary error statistics of a candidate vs a reference')
    analyze.add_argument('--ref', required=True)
    analyze.add_argument('--cand', required=True)
    analyze.add_argument('--out', required=True)
    analyze.add_argument('--csv', help='raw error samples')
    analyze.add_argument('--config')

    eval_ap = commands.add_parser('eval-ap', help='COCO-style average precision')
    eval_ap.add_argument('--gt', required=True)
    eval_ap.add_argument('--preds', required=True)
    eval_ap.add_argument('--out', required=True)
    eval_ap.add_argument('--thresholds', type=_thresholds, help='comma-separated IoU thresholds')
    eval_ap.add_argument('--max-dets', dest='max_dets', type=int)
    eval_ap.add_argument('--config')
    return parser


def _flags(args: argparse.Namespace, *names: str) -> Dict[str, Any]:
    return {name: getattr(args, name) for name in names}


def _emit_report(report: Dict[str, Any], path: Optional[str]) -> None:
    if path:
        write_json(path, report, canonical=True)
    else:
        sys.stdout.write(dumps(report, canonical=True))


def _write_csv(rows: List[Dict[str, Any]], path: Optional[str]) -> None:
    if path:
        write_text(path, pd.DataFrame(rows).to_csv(index=False, lineterminator='\n'))


def _run(args: argparse.Namespace) -> CommandResult:
    file_values = load_config_file(getattr(args, 'config', None))

    if args.command == 'corrupt':
        result = pipeline_service.corrupt(load_dataset(args.ann), _flags(args, 'model', 'gamma', 'seed', 'clip'),
                                          file_values)
        write_json(args.out, dataset_to_dict(result.dataset), canonical=True)
        _emit_report(result.report, args.report)

    elif args.command == 'correct':
        result = pipeline_service.correct(load_dataset(args.ann), load_results(args.preds),
                                          _flags(args, 'weight', 'iou_floor', 'score_floor', 'top_k'),
                                          file_values)
        write_json(args.out, dataset_to_dict(result.dataset), canonical=True)
        _write_csv(result.rows, args.csv)
        _emit_report(result.report, args.report)

    elif args.command == 'simulate':
        clean = load_dataset(args.ann) if args.ann else None
        result = pipeline_service.simulate(_flags(args, 'seed', 'sweep'), file_values, clean=clean,
                                           include_predictions=bool(args.predictions_out))
        write_json(args.out, result.report, canonical=True)
        _write_csv(result.rows, args.csv)
        if args.predictions_out:
            write_json(args.predictions_out, predictions_to_results(result.predictions), canonical=True)
        if args.dataset_out:
            write_json(args.dataset_out, dataset_to_dict(result.dataset), canonical=True)

    elif args.command == 'analyze':
        result = pipeline_service.analyze(load_dataset(args.ref), load_dataset(args.cand), {}, file_values)
        write_json(args.out, result.report, canonical=True)
        _write_csv(result.rows, args.csv)

    else:
        result = pipeline_service.eval_ap(load_dataset(args.gt), load_results(args.preds),
                                          _flags(args, 'thresholds', 'max_dets'), file_values)
        write_json(args.out, result.report, canonical=True)

    return result


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=args.log_level, stream=sys.stderr,
                            format='%(asctime)s %(levelname)s %(name)s: %(message)s')
        _run(args)
    except ToolkitError as e:
        sys.stderr.write(json.dumps(e.to_dict()) + '\n')
        return e.exit_code
    except SystemExit as e:
        # --help
        return e.code if isinstance(e.code, int) else 0
    except OSError as e:
        sys.stderr.write(json.dumps({'code': 'io_error', 'message': str(e)}) + '\n')
        return 2
    except Exception as e:
        logger.exception('unexpected failure')
        sys.stderr.write(json.dumps(error_payload(e)) + '\n')
        return 2
    return 0


if __name__ == '__main__':
    sys.exit(main())
