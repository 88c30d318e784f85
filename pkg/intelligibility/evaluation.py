"""
Prediction metrics and result files.

File formats:
    - Predictions CSV ``utterance_id,predicted,truth`` (truth may be empty).
    - Scatter CSV ``utterance_id,truth,predicted`` for plotting.
    - MetricReport JSON ``{rmse, stderr, lcc, n}``.
    - Comparison CSV ``system,rmse,stderr,lcc,n``.
"""
import csv
import json
import logging
import math
from pathlib import Path
from typing import Dict, Iterable, List

import numpy as np
from scipy import stats

from intelligibility.exceptions import MetricError, ValidationError
from intelligibility.models import MetricReport, PredictionRecord

logger = logging.getLogger(__name__)

PREDICTION_FIELDS = ['utterance_id', 'predicted', 'truth']
SCATTER_FIELDS = ['utterance_id', 'truth', 'predicted']
COMPARISON_FIELDS = ['system', 'rmse', 'stderr', 'lcc', 'n']


def _pairs(records):
    records = list(records)
    if not records:
        raise MetricError("metric undefined for an empty prediction set")
    unlabeled = [r.utterance_id for r in records if r.truth is None]
    if unlabeled:
        raise MetricError(f"records without truth: {', '.join(unlabeled)}")
    predicted = np.array([r.predicted for r in records])
    truth = np.array([r.truth for r in records])
    return predicted, truth


def rmse(records: Iterable[PredictionRecord]) -> float:
    """Root mean square error between predicted and true scores."""
    predicted, truth = _pairs(records)
    return float(np.sqrt(np.mean((predicted - truth) ** 2)))


def stderr_metric(records: Iterable[PredictionRecord]) -> float:
    """Standard error of the RMSE: rmse / sqrt(n)."""
    records = list(records)
    return rmse(records) / math.sqrt(len(records))


def lcc(records: Iterable[PredictionRecord]) -> float:
    """
    Pearson linear correlation between predicted and true scores.

    Raises:
        MetricError: Fewer than two records, or a constant side
    """
    predicted, truth = _pairs(records)
    if predicted.size < 2:
        raise MetricError("LCC needs at least two records")
    if np.all(predicted == predicted[0]) or np.all(truth == truth[0]):
        raise MetricError("LCC undefined for a constant prediction or truth vector")
    return float(stats.pearsonr(predicted, truth)[0])


def summarize(records: Iterable[PredictionRecord]) -> MetricReport:
    """All three metrics; lcc is None where it is undefined."""
    records = list(records)
    try:
        correlation = lcc(records)
    except MetricError as e:
        logger.warning("LCC not reported: %s", e)
        correlation = None
    return MetricReport(rmse(records), stderr_metric(records), correlation, len(records))


def write_report(report: MetricReport, path):
    Path(path).write_text(json.dumps(report.to_dict(), indent=2) + '\n', encoding='utf-8')


def _format(value):
    return '' if value is None else repr(float(value))


def write_predictions(records: Iterable[PredictionRecord], path):
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(PREDICTION_FIELDS)
        for r in records:
            writer.writerow([r.utterance_id, _format(r.predicted), _format(r.truth)])


def _read_rows(path, fields):
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"file not found: {path}")
    with open(path, newline='', encoding='utf-8') as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or [h.strip() for h in reader.fieldnames] != fields:
            raise ValidationError(f"{path}: header must be '{','.join(fields)}'")
        for row in reader:
            yield reader.line_num, row


def _parse_float(path, line, value, name):
    value = (value or '').strip()
    if not value:
        return None
    try:
        return float(value)
    except ValueError:
        raise ValidationError(f"{path}: row {line}: {name} '{value}' is not a number")


def read_predictions(path) -> List[PredictionRecord]:
    """
    Raises:
        ValidationError: Missing file, wrong header or malformed row
    """
    records = []
    for line, row in _read_rows(path, PREDICTION_FIELDS):
        predicted = _parse_float(path, line, row['predicted'], 'predicted')
        if predicted is None:
            raise ValidationError(f"{path}: row {line}: predicted score is empty")
        truth = _parse_float(path, line, row['truth'], 'truth')
        try:
            records.append(PredictionRecord(row['utterance_id'].strip(), predicted, truth))
        except ValidationError as e:
            raise ValidationError(f"{path}: row {line}: {e}")
    return records


def export_scatter(records: Iterable[PredictionRecord], path):
    """
    Write (truth, predicted) pairs in input order.

    Raises:
        MetricError: Empty record set or records without truth
    """
    records = list(records)
    _pairs(records)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(SCATTER_FIELDS)
        for r in records:
            writer.writerow([r.utterance_id, _format(r.truth), _format(r.predicted)])


def read_scatter(path) -> List[PredictionRecord]:
    records = []
    for line, row in _read_rows(path, SCATTER_FIELDS):
        truth = _parse_float(path, line, row['truth'], 'truth')
        predicted = _parse_float(path, line, row['predicted'], 'predicted')
        records.append(PredictionRecord(row['utterance_id'].strip(), predicted, truth))
    return records


def compare_systems(systems: Dict[str, Iterable[PredictionRecord]]) -> List[dict]:
    """
    One result row per named system, in the given order.

    Rows without truth are left out of each system's metrics.
    """
    rows = []
    for name, records in systems.items():
        labeled = [r for r in records if r.truth is not None]
        report = summarize(labeled)
        rows.append({'system': name, **report.to_dict()})
    return rows


def write_comparison(rows, path):
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(COMPARISON_FIELDS)
        for row in rows:
            writer.writerow([
                row['system'],
                f"{row['rmse']:.2f}",
                f"{row['stderr']:.2f}",
                '' if row['lcc'] is None else f"{row['lcc']:.2f}",
                row['n'],
            ])
