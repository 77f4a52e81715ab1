import math
from unittest import mock

import numpy as np
from django.test import SimpleTestCase

from lsvar.exceptions import InvalidInputError, UndefinedMetricError
from var_model.domain import LowRankSparsePair, PiecewiseVarModel
from var_model.utils import check_stability
from .domain import MetricsReport, Scenario
from .scenarios import (
    CATALOG,
    MAX_BASIS_DRAWS,
    build_scenario_model,
    generate_scenario,
    get_scenario,
    sparse_pattern,
)
from .utils import (
    benchmark_frame,
    estimation_error_curve,
    evaluate_detection,
    hausdorff_directed,
    realised_parameters,
    relative_error,
    run_benchmark,
    selection_rate,
    sensitivity_specificity,
    snr,
    stationary_model,
    success_band,
    summarize_benchmark,
)


def scalar_model(values, change_points):
    segments = [LowRankSparsePair(np.zeros((1, 1)), np.array([[value]])) for value in values]
    return PiecewiseVarModel(change_points, segments, noise_std=0.1)


def fake_result(seed, detected, truths=(100, 200), T=300):
    return {
        'scenario': 'fake', 'seed': seed, 'method': 'two-step', 'T': T, 'truths': list(truths),
        'change_points': list(detected), 'elapsed': 0.5,
        'metrics': {'m_hat': len(detected), 'hausdorff': hausdorff_directed(detected, truths),
                    'sensitivity': None, 'specificity': None, 'relative_errors': None},
    }


class HausdorffTests(SimpleTestCase):
    def test_identical_sets(self):
        self.assertEqual(hausdorff_directed({10, 50}, {10, 50}), 0.0)

    def test_enumerated_example(self):
        self.assertEqual(hausdorff_directed({10, 50}, {12, 48, 90}), 40.0)

    def test_subset(self):
        self.assertEqual(hausdorff_directed({10, 30, 50}, {30}), 0.0)

    def test_empty_sets(self):
        self.assertEqual(hausdorff_directed(set(), set()), 0.0)
        self.assertTrue(math.isinf(hausdorff_directed(set(), {5})))

    def test_zero_iff_contained(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            A = set(rng.integers(0, 20, size=4).tolist())
            B = set(rng.integers(0, 20, size=3).tolist())
            self.assertEqual(hausdorff_directed(A, B) == 0, B <= A)


class SupportMetricTests(SimpleTestCase):
    def setUp(self):
        self.S = np.array([[0.5, 0.0, 0.0], [0.0, 0.0, -0.4], [0.0, 0.0, 0.0]])

    def test_exact_support(self):
        self.assertEqual(sensitivity_specificity(self.S, self.S), (1.0, 1.0))

    def test_zero_estimate(self):
        sen, spc = sensitivity_specificity(np.zeros((3, 3)), self.S)
        self.assertEqual(sen, 0.0)
        self.assertAlmostEqual(spc, 7 / 9)

    def test_empty_truth(self):
        with self.assertRaises(UndefinedMetricError):
            sensitivity_specificity(self.S, np.zeros((3, 3)))

    def test_permutation_invariance(self):
        rng = np.random.default_rng(1)
        estimate = self.S + 0.01 * (rng.uniform(size=(3, 3)) > 0.5)
        order = [2, 0, 1]
        self.assertEqual(
            sensitivity_specificity(estimate, self.S),
            sensitivity_specificity(estimate[np.ix_(order, order)], self.S[np.ix_(order, order)]),
        )

    def test_shape_mismatch(self):
        with self.assertRaises(InvalidInputError):
            sensitivity_specificity(np.zeros((2, 2)), self.S)


class RelativeErrorTests(SimpleTestCase):
    def test_examples(self):
        truth = np.array([[1.0, 2.0], [0.0, -1.0]])
        self.assertEqual(relative_error(truth, truth), 0.0)
        self.assertAlmostEqual(relative_error(np.zeros((2, 2)), truth), 1.0)
        self.assertAlmostEqual(relative_error(2 * truth, truth), 1.0)

    def test_zero_truth(self):
        with self.assertRaises(UndefinedMetricError):
            relative_error(np.eye(2), np.zeros((2, 2)))

    def test_report_rejects_bad_rates(self):
        with self.assertRaises(InvalidInputError):
            MetricsReport(sensitivity=1.5)
        with self.assertRaises(InvalidInputError):
            MetricsReport(relative_errors=(0.1, -0.2, 0.0))


class SelectionRateTests(SimpleTestCase):
    truths = [100, 200]

    def test_band(self):
        self.assertEqual(success_band(self.truths, 0, 300), (90.0, 110.0))
        self.assertEqual(success_band([60, 200], 1, 300), (186.0, 210.0))

    def test_exact_replicates(self):
        self.assertEqual(selection_rate([[100, 200]] * 5, self.truths, 300), [1.0, 1.0])

    def test_outside_band(self):
        self.assertEqual(selection_rate([[50, 250]] * 3, self.truths, 300), [0.0, 0.0])

    def test_mixed(self):
        rates = selection_rate([[100, 200], [105], [150, 195], []], self.truths, 300)
        self.assertEqual(rates, [0.5, 0.5])

    def test_halving_band_never_increases(self):
        rng = np.random.default_rng(2)
        detections = [sorted(rng.integers(80, 220, size=2).tolist()) for _ in range(30)]
        full = selection_rate(detections, self.truths, 300)
        half = selection_rate(detections, self.truths, 300, scale=0.5)
        self.assertTrue(all(h <= f for h, f in zip(half, full)))

    def test_unsorted_truths(self):
        with self.assertRaises(InvalidInputError):
            selection_rate([[1]], [200, 100], 300)


class SnrTests(SimpleTestCase):
    def test_unit_jump(self):
        model = scalar_model([0.5, -0.5, 0.5], [100, 200])
        self.assertAlmostEqual(snr(model, 300), 100 / 300)

    def test_zero_jump(self):
        self.assertEqual(snr(scalar_model([0.5, 0.5], [150]), 300), 0.0)

    def test_spacing_and_length(self):
        model = scalar_model([0.5, -0.5, 0.5], [100, 200])
        self.assertAlmostEqual(snr(model, 600), 100 / 600)

    def test_requires_change(self):
        with self.assertRaises(UndefinedMetricError):
            snr(scalar_model([0.5], []), 300)

    def test_detection_report(self):
        model = scalar_model([0.5, -0.5, 0.5], [100, 200])
        report = evaluate_detection([98, 260], model, 300).to_dict()
        self.assertEqual(report['hausdorff'], 60.0)
        self.assertEqual(report['selection_rate'], 0.5)
        self.assertEqual((report['m_hat'], report['m0']), (2, 2))


class ScenarioTests(SimpleTestCase):
    def test_catalog_rows(self):
        a1 = get_scenario('A.1')
        self.assertEqual((a1.p, a1.T, a1.tau_rel, a1.ranks), (20, 300, (0.5,), (1, 3)))
        self.assertEqual((a1.v_L, a1.v_S, a1.gamma), ((0.10,), (1.5,), (0.25, 0.25)))
        self.assertEqual(get_scenario('L.2').change_points, [180, 450, 720, 1080, 1440])
        self.assertEqual(get_scenario('G.8').p, 50)
        self.assertEqual(get_scenario('F.3').gamma, (0.5, 0.95))

    def test_unknown_name(self):
        with self.assertRaises(InvalidInputError):
            get_scenario('Z.9')

    def test_invalid_parameters(self):
        with self.assertRaises(InvalidInputError):
            Scenario('bad', 5, 100, (0.5,), (1,), (0.1,), (1.0,), (0.25, 0.25))

    def test_every_catalog_model_is_stable(self):
        for name, scenario in CATALOG.items():
            model = build_scenario_model(scenario)
            self.assertTrue(all(check_stability(A) for A in model.transitions()), name)
            self.assertEqual(model.change_points, scenario.change_points, name)

    def test_realised_jumps_match_catalog(self):
        a1 = build_scenario_model(get_scenario('A.1'))
        self.assertEqual(a1.metadata['contraction'], 1.0)
        self.assertAlmostEqual(a1.metadata['jump_lowrank'][0], 0.10, places=8)
        self.assertAlmostEqual(a1.metadata['jump_sparse'][0], 1.5, places=6)
        for ratio in a1.metadata['information_ratio']:
            self.assertAlmostEqual(ratio, 0.25, places=8)

        l1 = build_scenario_model(get_scenario('L.1'))
        self.assertEqual(l1.metadata['contraction'], 1.0)
        np.testing.assert_allclose(l1.metadata['jump_lowrank'], [0.10] * 5, atol=1e-8)
        np.testing.assert_allclose(l1.metadata['jump_sparse'], [1.5] * 5, atol=1e-6)

    def test_basis_seed_and_segment_structure_recorded(self):
        scenario = get_scenario('A.1')
        model = build_scenario_model(scenario, model_seed=3)
        self.assertGreaterEqual(model.metadata['basis_seed'], 3)
        self.assertLess(model.metadata['basis_seed'], 3 + MAX_BASIS_DRAWS)
        self.assertEqual(model.metadata['ranks'], list(scenario.ranks))
        self.assertEqual(model.metadata['sparse_nonzeros'], [scenario.p - 1] * 2)
        alpha_L = model.segments[0].alpha_L
        for spikiness in model.metadata['spikiness']:
            self.assertLessEqual(spikiness, alpha_L + 1e-9)

    def test_first_sparse_component_is_negative(self):
        model = build_scenario_model(get_scenario('A.1'))
        first, second = (segment.S[0, 1] for segment in model.segments)
        self.assertLess(first, 0.0)
        self.assertGreater(second, 0.0)

    def test_family_rows_keep_distinct_jumps(self):
        for family in ('D', 'E'):
            models = [build_scenario_model(get_scenario(f'{family}.{i}')) for i in (1, 2, 3)]
            jumps = [model.metadata['jump_lowrank'][0] for model in models]
            self.assertEqual(len({round(jump, 8) for jump in jumps}), 3, family)
            for first, second in zip(models, models[1:]):
                if first.metadata['contraction'] == second.metadata['contraction']:
                    nominal = second.metadata['scenario']['v_L'][0] / first.metadata['scenario']['v_L'][0]
                    realised = second.metadata['jump_lowrank'][0] / first.metadata['jump_lowrank'][0]
                    self.assertAlmostEqual(realised, nominal, places=6)

    def test_random_support_pattern(self):
        P = sparse_pattern(get_scenario('N.1'))
        self.assertEqual(int(np.count_nonzero(P)), 20)
        self.assertEqual(int(np.count_nonzero(np.diag(P))), 0)
        np.testing.assert_array_equal(P, sparse_pattern(get_scenario('N.3')))

    def test_generation_is_deterministic(self):
        first_model, first = generate_scenario('N.1', seed=5)
        _, second = generate_scenario('N.1', seed=5)
        np.testing.assert_array_equal(first.values, second.values)
        self.assertEqual(first.values.shape, (300, 20))
        self.assertEqual(first_model.change_points, [100, 200])


class BenchmarkAggregationTests(SimpleTestCase):
    def setUp(self):
        self.results = [fake_result(0, [100, 200]), fake_result(1, [104, 185]), fake_result(2, [])]

    def test_frame_columns(self):
        frame = benchmark_frame(self.results)
        self.assertEqual(list(frame.columns), ['replicate', 'point_index', 'truth_rel', 'est_rel', 'success'])
        self.assertEqual(len(frame), 6)
        self.assertTrue(np.isnan(frame.loc[4, 'est_rel']))

    def test_summary_structure(self):
        summary = summarize_benchmark('fake', 'two-step', self.results)
        self.assertEqual(summary['replicates'], 3)
        first, second = summary['points']
        self.assertAlmostEqual(first['truth_rel'], 1 / 3)
        self.assertAlmostEqual(first['mean'], 102 / 300)
        self.assertAlmostEqual(first['selection_rate'], 2 / 3)
        self.assertAlmostEqual(second['selection_rate'], 1 / 3)
        self.assertEqual(summary['m_hat']['counts'], {'0': 1, '2': 2})

    def test_summary_carries_realised_parameters(self):
        model = build_scenario_model(get_scenario('DP.1'))
        realised = realised_parameters(model, snr_value=0.5)
        results = [dict(result, realised=realised) for result in self.results]
        summary = summarize_benchmark('DP.1', 'dp', results)
        self.assertEqual(summary['realised']['v_S'], model.metadata['jump_sparse'])
        self.assertEqual(summary['realised']['basis_seed'], model.metadata['basis_seed'])
        self.assertEqual(summary['realised']['snr'], 0.5)
        self.assertIsNone(summarize_benchmark('fake', 'two-step', self.results)['realised'])

    def test_replicates_run_through_celery(self):
        def fake(name, seed, method, options):
            return fake_result(seed, [100, 200])

        with mock.patch('evaluation.tasks.run_replicate', side_effect=fake) as patched:
            frame, summary = run_benchmark('L.1', replicates=3, base_seed=7, method='two-step')
        self.assertEqual([call.args[1] for call in patched.call_args_list], [7, 8, 9])
        self.assertEqual(len(frame), 6)
        self.assertEqual([point['selection_rate'] for point in summary['points']], [1.0, 1.0])

    def test_rejects_zero_replicates(self):
        with self.assertRaises(InvalidInputError):
            run_benchmark('A.1', replicates=0)


class EstimationCurveTests(SimpleTestCase):
    def test_error_shrinks_with_sample_size(self):
        u = np.array([1.0, 1.0]) / math.sqrt(2)
        pair = LowRankSparsePair(0.2 * np.outer(u, u), np.diag([0.5, 0.0]), alpha_L=1.0)
        curve = estimation_error_curve(stationary_model(pair), (50, 800), replicates=5, seed=3)
        self.assertEqual([point['N'] for point in curve], [50, 800])
        self.assertLess(curve[1]['median_error'], curve[0]['median_error'])

    def test_requires_stationary_model(self):
        with self.assertRaises(InvalidInputError):
            estimation_error_curve(scalar_model([0.5, -0.5], [50]), (50,), 1, 0)
