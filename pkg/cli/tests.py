import json
import tempfile
from io import StringIO
from pathlib import Path
from unittest import mock

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from lsvar.exceptions import IngestionError, InvalidInputError
from var_model.domain import TimeSeriesData
from .domain import RunConfig
from .utils import detrend_period_average, ingest_csv, run, subsample


class WorkspaceMixin:
    def setUp(self):
        super().setUp()
        self._tmp = tempfile.TemporaryDirectory()
        self.workspace = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()
        super().tearDown()

    def write(self, name, text):
        path = self.workspace / name
        path.write_text(text, encoding='utf-8')
        return path

    def write_series(self, name, values):
        values = np.atleast_2d(np.asarray(values, dtype=float).T).T
        lines = [','.join(f'{value:.10g}' for value in row) for row in values]
        return self.write(name, '\n'.join(lines) + '\n')


def ar_series(T, coefficients, change, seed, noise=0.1):
    """Scalar AR(1) switching from coefficients[0] to coefficients[1] at `change`."""
    rng = np.random.default_rng(seed)
    x = np.zeros(T)
    x[0] = 1.0
    for t in range(1, T):
        x[t] = (coefficients[0] if t < change else coefficients[1]) * x[t - 1] + noise * rng.standard_normal()
    return x


class IngestTests(WorkspaceMixin, SimpleTestCase):
    def test_numeric_file(self):
        data = ingest_csv(self.write('plain.csv', '1,2\n3,4\n5,6\n'))
        self.assertEqual((data.T, data.p), (3, 2))
        self.assertEqual(data.metadata['columns'], ['x1', 'x2'])

    def test_header_is_skipped(self):
        data = ingest_csv(self.write('header.csv', 'a,b\n1,2\n3,4\n5,6\n'))
        self.assertEqual((data.T, data.p), (3, 2))
        self.assertEqual(data.metadata['columns'], ['a', 'b'])
        np.testing.assert_array_equal(data.values[0], [1.0, 2.0])

    def test_ragged_row(self):
        with self.assertRaises(IngestionError) as caught:
            ingest_csv(self.write('ragged.csv', '1,2\n3,4\n5,6,7\n'))
        self.assertEqual(caught.exception.row, 3)

    def test_non_numeric_cell(self):
        with self.assertRaises(IngestionError) as caught:
            ingest_csv(self.write('bad.csv', 'a,b\n1,2\n3,oops\n'))
        self.assertEqual((caught.exception.row, caught.exception.column), (3, 2))

    def test_empty_file(self):
        with self.assertRaises(IngestionError):
            ingest_csv(self.write('empty.csv', ''))

    def test_non_utf8_file(self):
        path = self.workspace / 'latin1.csv'
        path.write_bytes(b'1,2\n\xff,4\n5,6\n')
        with self.assertRaises(IngestionError):
            ingest_csv(path)

    def test_directory_is_not_a_file(self):
        with self.assertRaises(IngestionError):
            ingest_csv(self.workspace)


class PreprocessingTests(SimpleTestCase):
    def test_constant_series(self):
        out = detrend_period_average(TimeSeriesData(np.full((20, 2), 3.5)), 4)
        self.assertEqual(out.T, 16)
        np.testing.assert_allclose(out.values, 0.0)

    def test_unit_period_is_forward_difference(self):
        out = detrend_period_average(TimeSeriesData(np.array([1.0, 4.0, 9.0, 16.0, 25.0])), 1)
        np.testing.assert_allclose(out.values[:, 0], [-3.0, -5.0, -7.0, -9.0])

    def test_linear_trend_is_removed(self):
        t = np.arange(100, dtype=float)
        out = detrend_period_average(TimeSeriesData(np.column_stack([2.0 + 0.5 * t, -t])), 8)
        self.assertLessEqual(float(np.max(np.std(out.values, axis=0))), 1e-10)
        np.testing.assert_allclose(out.values[0], [-0.5 * 9 / 2, 9 / 2])

    def test_period_too_long(self):
        with self.assertRaises(InvalidInputError):
            detrend_period_average(TimeSeriesData(np.zeros((5, 1))), 5)

    def test_subsample(self):
        data = TimeSeriesData(np.arange(20, dtype=float).reshape(10, 2))
        out = subsample(data, 3)
        np.testing.assert_array_equal(out.values[:, 0], [0.0, 6.0, 12.0, 18.0])
        self.assertIs(subsample(data, 1), data)


class RunConfigTests(WorkspaceMixin, SimpleTestCase):
    def test_unknown_command(self):
        with self.assertRaises(InvalidInputError):
            RunConfig('fit', self.workspace)

    def test_missing_input(self):
        with self.assertRaises(InvalidInputError):
            RunConfig('detect-multi', self.workspace, input_path=self.workspace / 'missing.csv')

    def test_ranges_checked_before_running(self):
        path = self.write('x.csv', '1\n2\n3\n')
        for overrides in ({'q': 1.5}, {'window_size': 3}, {'omega': -1.0}, {'grid_min': 5.0, 'grid_max': 1.0}):
            with self.assertRaises(InvalidInputError):
                RunConfig('detect-multi', self.workspace, input_path=path, **overrides)

    def test_alias_pins_method(self):
        config = RunConfig('detect-dp', self.workspace, input_path=self.write('x.csv', '1\n2\n'))
        self.assertEqual(config.method, 'dp')

    def test_benchmark_needs_scenario(self):
        with self.assertRaises(InvalidInputError):
            RunConfig('benchmark', self.workspace)


class CommandTests(WorkspaceMixin, SimpleTestCase):
    def call(self, *args):
        return call_command('lsvar', *args, stdout=StringIO())

    def read_json(self, path):
        return json.loads(Path(path).read_text(encoding='utf-8'))

    def test_simulate_then_evaluate(self):
        out = self.workspace / 'sim'
        self.call('simulate', '--scenario', 'A.1', '--seed', '3', '--output-dir', str(out))
        data = ingest_csv(out / 'data.csv')
        self.assertEqual((data.T, data.p), (300, 20))
        self.assertEqual(self.read_json(out / 'model.json')['change_points'], [150])

        report = self.write('report.json', json.dumps({'T': 300, 'change_points': [152]}))
        self.call('evaluate', '--input', str(report), '--model', str(out / 'model.json'),
                  '--output-dir', str(self.workspace / 'eval'))
        metrics = self.read_json(self.workspace / 'eval' / 'metrics.json')
        self.assertEqual(metrics['hausdorff'], 2.0)
        self.assertEqual(metrics['selection_rate'], 1.0)

    def test_detect_single_on_one_column(self):
        path = self.write_series('series.csv', ar_series(60, (0.8, -0.8), 30, seed=1))
        out = self.workspace / 'single'
        self.call('detect-single', '--input', str(path), '--output-dir', str(out))
        report = self.read_json(out / 'report.json')
        self.assertEqual(report['p'], 1)
        self.assertEqual(len(report['change_points']), 1)
        self.assertTrue((out / 'curve.tsv').exists())

    def test_reports_are_deterministic(self):
        path = self.write_series('series.csv', ar_series(60, (0.8, -0.8), 30, seed=2))
        first, second = self.workspace / 'a', self.workspace / 'b'
        self.call('detect-single', '--input', str(path), '--output-dir', str(first))
        self.call('detect-single', '--input', str(path), '--output-dir', str(second))
        self.assertEqual((first / 'report.json').read_bytes(), (second / 'report.json').read_bytes())

    def test_detect_multi_writes_window_curves(self):
        rng = np.random.default_rng(4)
        path = self.write_series('noise.csv', 0.1 * rng.standard_normal((120, 2)))
        out = self.workspace / 'multi'
        self.call('detect-multi', '--input', str(path), '--omega', '1e6', '--output-dir', str(out))
        report = self.read_json(out / 'report.json')
        self.assertEqual(report['change_points'], [])
        self.assertEqual(report['method'], 'two-step')
        self.assertTrue((out / 'curve_window_1.tsv').exists())

    def test_error_json_and_exit_status(self):
        out = self.workspace / 'failed'
        with self.assertRaises(CommandError) as caught:
            self.call('detect-single', '--input', str(self.workspace / 'missing.csv'), '--output-dir', str(out))
        self.assertEqual(caught.exception.returncode, 2)
        self.assertEqual(self.read_json(out / 'error.json')['error']['code'], 'invalid_input')

    def test_ingestion_failure_maps_to_its_code(self):
        path = self.write('ragged.csv', '1,2\n3,4\n5,6,7\n')
        config = RunConfig('detect-multi', self.workspace / 'ragged', input_path=path)
        self.assertEqual(run(config), 8)
        error = self.read_json(self.workspace / 'ragged' / 'error.json')['error']
        self.assertEqual((error['code'], error['type']), ('ingestion_failed', 'IngestionError'))

    def test_non_utf8_input_writes_error_json(self):
        path = self.workspace / 'latin1.csv'
        path.write_bytes(b'1,2\n\xff,4\n5,6\n')
        config = RunConfig('detect-single', self.workspace / 'latin1', input_path=path)
        self.assertEqual(run(config), 8)
        error = self.read_json(self.workspace / 'latin1' / 'error.json')['error']
        self.assertEqual(error['code'], 'ingestion_failed')

    def test_unexpected_failure_maps_to_internal_error(self):
        def broken(config):
            raise np.linalg.LinAlgError('singular matrix')

        path = self.write('x.csv', '1\n2\n3\n')
        config = RunConfig('detect-multi', self.workspace / 'broken', input_path=path)
        with mock.patch.dict('cli.utils.HANDLERS', {'detect-multi': broken}):
            self.assertEqual(run(config), 9)
        error = self.read_json(self.workspace / 'broken' / 'error.json')['error']
        self.assertEqual((error['code'], error['type']), ('internal_error', 'InternalError'))
        self.assertIn('LinAlgError', error['message'])
