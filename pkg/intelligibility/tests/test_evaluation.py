"""
Tests for metrics and result files.
"""
import json
import math
import tempfile
import unittest
from pathlib import Path

import numpy as np

from intelligibility.evaluation import (
    compare_systems,
    export_scatter,
    lcc,
    read_predictions,
    read_scatter,
    rmse,
    stderr_metric,
    summarize,
    write_comparison,
    write_predictions,
    write_report,
)
from intelligibility.exceptions import MetricError, ValidationError
from intelligibility.models import PredictionRecord


def constant_error_records(error, n):
    """n records whose RMSE is exactly ``error``."""
    return [PredictionRecord(f"u{i}", 50.0 + error, 50.0) for i in range(n)]


class MetricTests(unittest.TestCase):
    """Test rmse, stderr_metric and lcc"""

    def test_rmse_example(self):
        """Should give sqrt((10^2 + 0^2) / 2)"""
        records = [PredictionRecord('a', 60.0, 50.0), PredictionRecord('b', 20.0, 20.0)]
        self.assertAlmostEqual(rmse(records), math.sqrt(50.0), places=12)
        self.assertAlmostEqual(stderr_metric(records), math.sqrt(50.0) / math.sqrt(2), places=12)

    def test_match_direct_formulas(self):
        """Should agree with brute-force RMSE and Pearson formulas"""
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(2, 30))
            predicted, truth = rng.uniform(0, 100, n), rng.uniform(0, 100, n)
            records = [PredictionRecord(f"u{i}", p, t) for i, (p, t) in enumerate(zip(predicted, truth))]

            expected_rmse = math.sqrt(sum((p - t) ** 2 for p, t in zip(predicted, truth)) / n)
            mp, mt = sum(predicted) / n, sum(truth) / n
            cov = sum((p - mp) * (t - mt) for p, t in zip(predicted, truth))
            expected_lcc = cov / math.sqrt(sum((p - mp) ** 2 for p in predicted) * sum((t - mt) ** 2 for t in truth))

            self.assertAlmostEqual(rmse(records), expected_rmse, delta=1e-9)
            self.assertAlmostEqual(lcc(records), expected_lcc, delta=1e-9)

    def test_stderr_reproduces_published_pairs(self):
        """Should turn published (RMSE, n) pairs into their standard errors"""
        self.assertEqual(round(stderr_metric(constant_error_records(28.52, 2421)), 2), 0.58)
        self.assertEqual(round(stderr_metric(constant_error_records(24.65, 2421)), 2), 0.50)
        self.assertEqual(round(stderr_metric(constant_error_records(30.72, 632)), 2), 1.22)
        # 24.36 / sqrt(632) = 0.969, published as 0.96
        self.assertAlmostEqual(stderr_metric(constant_error_records(24.36, 632)), 0.96, delta=0.01)

    def test_perfect_predictions(self):
        """Should give RMSE 0 and LCC 1 for perfect predictions"""
        records = [PredictionRecord(f"u{i}", v, v) for i, v in enumerate([10.0, 40.0, 90.0])]
        self.assertEqual(rmse(records), 0.0)
        self.assertAlmostEqual(lcc(records), 1.0, places=12)

    def test_undefined_metrics(self):
        """Should raise MetricError for empty, unlabeled, tiny or constant sets"""
        with self.assertRaises(MetricError):
            rmse([])
        with self.assertRaises(MetricError):
            rmse([PredictionRecord('a', 10.0)])
        with self.assertRaises(MetricError):
            lcc([PredictionRecord('a', 10.0, 20.0)])
        with self.assertRaisesRegex(MetricError, 'constant'):
            lcc([PredictionRecord('a', 10.0, 20.0), PredictionRecord('b', 10.0, 30.0)])

    def test_summarize_omits_undefined_lcc(self):
        """Should report lcc as None when it is undefined"""
        records = [PredictionRecord('a', 10.0, 20.0), PredictionRecord('b', 10.0, 30.0)]
        report = summarize(records)
        self.assertIsNone(report.lcc)
        self.assertEqual(report.n, 2)
        self.assertAlmostEqual(report.rmse, math.sqrt(250.0))


class ResultFileTests(unittest.TestCase):
    """Test prediction, scatter, report and comparison files"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        self.records = [
            PredictionRecord('u1', 41.5, 50.0),
            PredictionRecord('u2', 88.25, 75.0),
            PredictionRecord('u3', 12.0, None),
        ]

    def tearDown(self):
        self.tmp.cleanup()

    def test_predictions_file(self):
        """Should write and read predictions with empty truth cells"""
        path = self.dir / 'pred.csv'
        write_predictions(self.records, path)
        lines = path.read_text().splitlines()
        self.assertEqual(lines[0], 'utterance_id,predicted,truth')
        self.assertEqual(lines[3], 'u3,12.0,')
        self.assertEqual(read_predictions(path), self.records)

    def test_predictions_file_errors(self):
        """Should name the row of a malformed value"""
        path = self.dir / 'bad.csv'
        path.write_text('utterance_id,predicted,truth\nu1,abc,10\n')
        with self.assertRaisesRegex(ValidationError, 'row 2'):
            read_predictions(path)
        path.write_text('id,score\n')
        with self.assertRaises(ValidationError):
            read_predictions(path)
        with self.assertRaises(ValidationError):
            read_predictions(self.dir / 'absent.csv')

    def test_scatter_keeps_order(self):
        """Should export (truth, predicted) pairs in input order"""
        path = self.dir / 'scatter.csv'
        export_scatter(self.records[:2], path)
        self.assertEqual(path.read_text().splitlines()[1], 'u1,50.0,41.5')
        self.assertEqual(read_scatter(path), self.records[:2])

    def test_scatter_rejects_unlabeled(self):
        """Should refuse records without truth"""
        with self.assertRaises(MetricError):
            export_scatter(self.records, self.dir / 'scatter.csv')

    def test_report_json(self):
        """Should write the metric report as JSON"""
        path = self.dir / 'report.json'
        write_report(summarize(self.records[:2]), path)
        data = json.loads(path.read_text())
        self.assertEqual(set(data), {'rmse', 'stderr', 'lcc', 'n'})
        self.assertEqual(data['n'], 2)

    def test_comparison(self):
        """Should give one row per system in order, skipping unlabeled rows"""
        rows = compare_systems({
            'binaural': self.records,
            'left': [PredictionRecord('u1', 60.0, 50.0), PredictionRecord('u2', 60.0, 75.0)],
        })
        self.assertEqual([r['system'] for r in rows], ['binaural', 'left'])
        self.assertEqual(rows[0]['n'], 2)
        path = self.dir / 'compare.csv'
        write_comparison(rows, path)
        lines = path.read_text().splitlines()
        self.assertEqual(lines[0], 'system,rmse,stderr,lcc,n')
        self.assertEqual(lines[2], 'left,12.75,9.01,,2')


if __name__ == '__main__':
    unittest.main()
