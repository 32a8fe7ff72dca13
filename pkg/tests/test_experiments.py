import csv
import json
import math
import tempfile
import unittest
from pathlib import Path
from unittest import mock

from django.test import SimpleTestCase, override_settings
from threadpoolctl import threadpool_info

from capa_wmmse.config import ExperimentConfig, Method, SweepVariable, load_config
from capa_wmmse.exceptions import DimensionError, SampleBudgetExceeded
from capa_wmmse.experiments import (
    apply_sweep, bench_cell, fourier_order, mode_count, place_receiver, resolve_streams, run_bench, run_correlate,
    run_dof, run_solve, run_sweep, solve_method, solve_metasurface,
)
from capa_wmmse.geometry import ApertureGeometry
from tests import settings


def read_rows(path: Path) -> list:
    with open(path, newline='') as f:
        return list(csv.DictReader(f))


class ExperimentTestCase(SimpleTestCase):
    def setUp(self):
        directory = tempfile.TemporaryDirectory()
        self.addCleanup(directory.cleanup)
        self.output = Path(directory.name)

    def config(self, **overrides) -> ExperimentConfig:
        """The small test link of data/valid.json writing into a temporary directory."""
        return load_config(f"{settings.BASE_DIR}/data/valid.json", {'output.path': str(self.output), **overrides})


class StreamRuleTests(ExperimentTestCase):
    def test_mode_count(self):
        self.assertEqual(mode_count(ApertureGeometry(0.5, 0.5), 0.125), 81)
        self.assertEqual(mode_count(ApertureGeometry(0.5, 0.25), 0.125), 45)

    def test_auto_fourier(self):
        self.assertEqual(resolve_streams(ExperimentConfig()), 81)

        # TEST: the quadrature size caps the stream count
        config = self.config(**{'solver.N': 'auto-fourier'})
        self.assertEqual(resolve_streams(config), 25)
        config = self.config(**{'solver.N': 'auto-fourier', 'solver.M': 4})
        self.assertEqual(resolve_streams(config), 16)

    def test_explicit(self):
        self.assertEqual(resolve_streams(self.config()), 4)
        with self.assertRaises(DimensionError):
            resolve_streams(self.config(**{'solver.N': 37}))

    def test_auto_dof(self):
        streams = resolve_streams(self.config(**{'solver.N': 'auto-dof'}))
        self.assertGreaterEqual(streams, 1)
        self.assertLessEqual(streams, 36)

    def test_fourier_order(self):
        self.assertEqual(fourier_order(ExperimentConfig()), 18)
        self.assertEqual(fourier_order(self.config()), 10)
        self.assertEqual(fourier_order(self.config(**{'solver.fourier_M': 12})), 12)

    @override_settings(CAPA_WMMSE_SAMPLE_BUDGET=100)
    def test_fourier_order_budget(self):
        with self.assertLogs('capa_wmmse.experiments', 'WARNING'):
            self.assertEqual(fourier_order(ExperimentConfig()), 10)


class ApplySweepTests(ExperimentTestCase):
    def test_variables(self):
        config = ExperimentConfig()

        self.assertEqual(apply_sweep(config, SweepVariable.POWER, 500.0).constants.power, 500.0)
        self.assertEqual(apply_sweep(config, 'frequency', 5e9).constants.frequency, 5e9)

        point = apply_sweep(config, SweepVariable.APERTURE, 0.16)
        self.assertAlmostEqual(point.tx.length_x, 0.4)
        self.assertAlmostEqual(point.rx.length_y, 0.4)
        self.assertEqual(point.rx.offset, config.rx.offset)

        self.assertEqual(apply_sweep(config, SweepVariable.DISTANCE, 3.0).rx.offset, (0.0, 0.0, 3.0))
        self.assertIs(apply_sweep(config, SweepVariable.SPACING, 0.5), config)

        # TEST: the original config is left untouched
        self.assertEqual(config, ExperimentConfig())

    def test_place_receiver(self):
        tx = ApertureGeometry(0.5, 0.5, offset=(1.0, 0.0, 0.0), beta=math.pi / 2)
        rx = place_receiver(tx, ApertureGeometry(0.5, 0.5), 2.0)
        for value, expected in zip(rx.offset, 2.0 * tx.normal + tx.center):
            self.assertAlmostEqual(value, expected)


class SolveTests(ExperimentTestCase):
    def test_run_solve(self):
        reports = run_solve(self.config())

        self.assertEqual([report.method for report in reports], ['wmmse', 'fourier_svd', 'spda'])
        for report in reports:
            self.assertGreater(report.rate_bits, 0)
            with open(self.output / f"{report.method}.json") as f:
                self.assertAlmostEqual(json.load(f)['rate_bits'], report.rate_bits)

        rows = read_rows(self.output / 'solve.csv')
        self.assertEqual([row['method'] for row in rows], ['wmmse', 'fourier_svd', 'spda'])
        self.assertEqual({row['status'] for row in rows}, {'ok'})

        # TEST: equal seeds give equal rates
        again = run_solve(self.config())
        self.assertEqual(again[0].rate_bits, reports[0].rate_bits)

    def test_msgpack_output(self):
        run_solve(self.config(**{'output.format': 'msgpack', 'methods': ['wmmse']}))
        self.assertTrue((self.output / 'wmmse.msgpack').exists())

    def test_spda_streams_are_clamped(self):
        # 0.25 m at half-wavelength spacing gives 4 x 4 elements
        report = solve_method(self.config(**{'solver.N': 20}), Method.SPDA)
        self.assertEqual(report.streams, 16)

    @override_settings(CAPA_WMMSE_SAMPLE_BUDGET=100)
    def test_dense_density_follows_budget(self):
        config = apply_sweep(self.config(), SweepVariable.FREQUENCY, 7.8e9)
        with self.assertLogs('capa_wmmse.baselines', 'WARNING'):
            report = solve_method(config, Method.DENSE_OPTIMAL)
        self.assertEqual(report.config['samples_per_axis'], 10)

        # TEST: an explicit density is not capped
        with self.assertRaises(SampleBudgetExceeded):
            solve_method(self.config(**{'solver.dense_samples': 11}), Method.DENSE_OPTIMAL)

    def test_metasurface(self):
        report = solve_metasurface(self.config(), Method.WMMSE, 0.25)
        self.assertEqual(report.extras['tx_elements'], 64)
        self.assertAlmostEqual(report.extras['spacing'], 0.03125)
        self.assertGreater(report.extras['continuous_rate'], 0)

        with self.assertRaises(SampleBudgetExceeded):
            solve_metasurface(self.config(), Method.WMMSE, 0.001)


class SweepTests(ExperimentTestCase):
    def test_power_sweep(self):
        rows = run_sweep(self.config(methods=['wmmse']), jobs=1)

        self.assertEqual([row['value'] for row in rows], [10.0, 100.0, 1000.0])
        self.assertEqual({row['status'] for row in rows}, {'ok'})
        rates = [row['rate_bits'] for row in rows]
        self.assertEqual(rates, sorted(rates))

        written = read_rows(self.output / 'sweep.csv')
        self.assertEqual(len(written), 3)
        self.assertEqual(written[0]['sweep_var'], 'power')

    @unittest.skipUnless(settings.SLOW_TESTS, 'set CAPA_WMMSE_SLOW_TESTS=1')
    def test_method_ordering(self):
        config = load_config(overrides={
            'output.path': str(self.output), 'methods': ['spda', 'fourier_svd', 'wmmse'],
        })
        rows = run_sweep(config, jobs=1)
        self.assertEqual({row['status'] for row in rows}, {'ok'})

        rates = {(row['value'], row['method']): row['rate_bits'] for row in rows}
        for value in config.sweep.points():
            # TEST: SPDA <= Fourier-SVD <= WMMSE at every transmit power
            self.assertLessEqual(rates[(value, 'spda')], rates[(value, 'fourier_svd')] + 1e-6, msg=f"P_T={value:g}")
            self.assertLessEqual(rates[(value, 'fourier_svd')], rates[(value, 'wmmse')] + 1e-6, msg=f"P_T={value:g}")

    def test_failed_point(self):
        config = self.config(**{'methods': ['wmmse'], 'sweep.variable': 'spacing', 'sweep.values': [0.25, 10.0]})
        with self.assertLogs('capa_wmmse.experiments', 'WARNING'):
            rows = run_sweep(config, jobs=1)

        self.assertEqual([row['status'] for row in rows], ['ok', 'failed'])
        self.assertIn('exceeds the aperture', rows[1]['message'])

        written = read_rows(self.output / 'sweep.csv')
        self.assertEqual(written[1]['rate_bits'], '')


class DofTests(ExperimentTestCase):
    def test_run_dof(self):
        reports = run_dof(self.config(), fresnel_ratios=[1.0, 100.0])

        self.assertEqual(len(reports), 2)
        self.assertAlmostEqual(reports[0].fresnel_ratio, 1.0)
        self.assertAlmostEqual(reports[1].distance, 2.5)
        self.assertGreaterEqual(reports[0].dof, reports[1].dof)
        self.assertEqual(len(read_rows(self.output / 'dof.csv')), 2)


class CorrelateTests(ExperimentTestCase):
    def test_run_correlate(self):
        correlation = run_correlate(self.config())
        self.assertEqual(correlation.streams, 4)

        with open(self.output / 'correlation.json') as f:
            payload = json.load(f)
        self.assertEqual(payload['solve']['method'], 'wmmse')
        self.assertAlmostEqual(payload['max_off_diagonal'], correlation.max_off_diagonal)

        with open(self.output / 'correlation.csv', newline='') as f:
            self.assertEqual(len(list(csv.reader(f))), 4)


class BenchTests(ExperimentTestCase):
    def test_run_bench(self):
        rows = run_bench(self.config())

        self.assertEqual([row['method'] for row in rows], ['wmmse', 'fourier_svd'])
        for row in rows:
            self.assertGreater(row['median_ms'], 0)
            self.assertGreaterEqual(row['cv'], 0)
            self.assertEqual(row['repeats'], 2)

        written = read_rows(self.output / 'bench.csv')
        self.assertEqual(written[0]['frequency'], repr(2.4e9))

    def test_bench_is_single_threaded(self):
        threads = []

        def record(config, method):
            threads.extend(pool['num_threads'] for pool in threadpool_info())
            return {'median_ms': 1.0, 'cv': 0.0, 'repeats': 1}

        with mock.patch('capa_wmmse.experiments.bench_cell', side_effect=record):
            run_bench(self.config())

        # TEST: every BLAS and OpenMP pool is pinned to one thread while timing
        self.assertEqual(set(threads) - {1}, set())

    def test_bench_cell(self):
        cell = bench_cell(self.config(**{'bench.include_channel': True}), Method.WMMSE)
        self.assertEqual(set(cell), {'median_ms', 'cv', 'repeats'})

    @unittest.skipUnless(settings.SLOW_TESTS, 'set CAPA_WMMSE_SLOW_TESTS=1')
    def test_complexity_trend(self):
        config = load_config(overrides={'output.path': str(self.output), 'bench.repeats': 3})
        rows = run_bench(config)

        wmmse = [row['median_ms'] for row in rows if row['method'] == 'wmmse']
        fourier = {(row['frequency'], row['area']): row['median_ms'] for row in rows if row['method'] == 'fourier_svd'}
        self.assertLess(max(wmmse) / min(wmmse), 2.0)
        self.assertGreaterEqual(fourier[(7.8e9, 0.4)], 10 * fourier[(2.4e9, 0.2)])

    @unittest.skipUnless(settings.SLOW_TESTS, 'set CAPA_WMMSE_SLOW_TESTS=1')
    def test_repeat_stability(self):
        config = load_config(overrides={'output.path': str(self.output), 'bench.repeats': 10})
        self.assertLess(bench_cell(config, Method.WMMSE)['cv'], 0.2)
