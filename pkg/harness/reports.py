"""
Run directories and the CSV/JSON artefacts written into them.
"""
import csv
import json
import logging
from pathlib import Path

from django.conf import settings
from django.utils import timezone

logger = logging.getLogger(__name__)

TRAINING_LOG_HEADER = ['episode', 'step', 'epsilon', 'action', 'reward', 'loss', 'target']
TRACE_HEADER = ['step', 'chosen_subset', 'acc_c1', 'acc_c2', 'acc_ensemble']
REPLICA_HEADER = ['replica', 'seed', 'metric', 'value', 'beta', 'validation_reads_during_rollout']
SUMMARY_HEADER = ['metric', 'Best', 'Worst', 'Average', 'STDDEV']


def runs_root():
    return Path(settings.COTRAINING.get('RUNS_DIR', 'runs'))


def make_run_dir(command, seed, root=None, now=None):
    """Create <root>/<command>-<YYYYmmdd-HHMMSS>-seed<seed>/ and return it."""
    now = now or timezone.now()
    root = Path(root) if root else runs_root()
    base = f"{command}-{now.strftime('%Y%m%d-%H%M%S')}-seed{seed}"
    run_dir = root / base
    suffix = 1
    while run_dir.exists():
        run_dir = root / f"{base}-{suffix}"
        suffix += 1
    run_dir.mkdir(parents=True)
    logger.info(f"Writing {command} outputs to {run_dir}")
    return run_dir


def _cell(value):
    if value is None:
        return ''
    if isinstance(value, float):
        return repr(value)
    return value


def write_csv(path, header, rows):
    """Rows are dicts keyed by header names or sequences in header order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            values = [row.get(name) for name in header] if isinstance(row, dict) else list(row)
            writer.writerow([_cell(value) for value in values])
    return path


def write_json(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + '\n', encoding='utf-8')
    return path


def read_json(path):
    return json.loads(Path(path).read_text(encoding='utf-8'))


def summary_rows(summaries):
    """summaries: {metric: {'best', 'worst', 'average', 'stddev'}} -> SUMMARY_HEADER rows."""
    return [
        [metric, values['best'], values['worst'], values['average'], values['stddev']]
        for metric, values in summaries.items()
    ]


def format_summary_table(summaries):
    """Plain-text Best/Worst/Average/STDDEV table for the console."""
    lines = [f"{'':<12}{'Best':>10}{'Worst':>10}{'Average':>10}{'STDDEV':>10}"]
    for metric, values in summaries.items():
        lines.append(
            f"{metric:<12}{values['best']:>10.4f}{values['worst']:>10.4f}"
            f"{values['average']:>10.4f}{values['stddev']:>10.4f}"
        )
    return '\n'.join(lines)
