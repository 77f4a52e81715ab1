import math
from unittest import mock

import numpy as np
from django.test import SimpleTestCase

from lsvar.exceptions import DegenerateIntervalError, InvalidInputError
from multi_detect.utils import plan_windows, two_step_detect
from single_detect.domain import SearchDomain
from var_model.domain import LowRankSparsePair, PiecewiseVarModel, TimeSeriesData
from var_model.utils import simulate_piecewise_var
from .domain import WeaklySparseConfig
from .utils import (
    WeaklySparseCost,
    applicability,
    combined_strategy,
    default_surrogate_domain,
    lq_norm_q,
    merge_within,
    radius_lower_bound,
    surrogate_detect_multi,
    surrogate_detect_single,
    surrogate_weight,
    threshold_support,
    weakly_sparse_pair_fitter,
)

ROTATION = 0.95 * np.array([[np.cos(0.4), -np.sin(0.4)], [np.sin(0.4), np.cos(0.4)]])
SHEAR = np.array([[0.3, 0.8], [-0.6, 0.2]])


def switching_series(T, change_points, seed, scale=0.8, noise=0.1):
    segments = [
        LowRankSparsePair(np.zeros((2, 2)), (-1) ** j * scale * np.eye(2))
        for j in range(len(change_points) + 1)
    ]
    model = PiecewiseVarModel(list(change_points), segments, noise_std=noise)
    return simulate_piecewise_var(model, T, seed=seed)


class LqNormTests(SimpleTestCase):
    def test_zero_matrix(self):
        self.assertEqual(lq_norm_q(np.zeros((3, 3)), 0.4), 0.0)

    def test_q_one_is_l1(self):
        A = np.array([[1.0, -2.0], [0.5, 0.0]])
        self.assertAlmostEqual(lq_norm_q(A, 1.0), 3.5)

    def test_single_term(self):
        self.assertAlmostEqual(lq_norm_q(np.array([[2.0, 0.0], [0.0, 0.0]]), 0.5), math.sqrt(2))

    def test_monotone_in_q(self):
        small = np.random.default_rng(0).uniform(0.01, 1.0, size=(4, 4))
        large = 1.0 + np.random.default_rng(1).uniform(0.0, 3.0, size=(4, 4))
        qs = (0.1, 0.3, 0.5, 0.8, 1.0)
        small_values = [lq_norm_q(small, q) for q in qs]
        large_values = [lq_norm_q(large, q) for q in qs]
        self.assertEqual(small_values, sorted(small_values, reverse=True))
        self.assertEqual(large_values, sorted(large_values))

    def test_rejects_q_outside_range(self):
        for q in (0.0, -0.5, 1.5):
            with self.assertRaises(InvalidInputError):
                lq_norm_q(np.eye(2), q)


class RadiusTests(SimpleTestCase):
    def test_zero_model(self):
        pair = LowRankSparsePair(np.zeros((2, 2)), np.zeros((2, 2)))
        self.assertEqual(radius_lower_bound([pair, pair], 0.5, 1.0), 0.0)

    def test_numeric_substitution(self):
        pair = LowRankSparsePair(np.diag([0.5, 0.0]), np.diag([0.3, 0.2]), alpha_L=1.0)
        expected = 2 * (math.sqrt(0.5) + 1) + 2 * math.sqrt(0.5)
        self.assertAlmostEqual(radius_lower_bound([pair], 0.5, 1.0), expected)
        self.assertAlmostEqual(expected, 4.828, places=3)

    def test_dense_sparse_part(self):
        pair = LowRankSparsePair(np.diag([0.5, 0.0]), np.full((2, 2), 0.1), alpha_L=1.0)
        self.assertAlmostEqual(radius_lower_bound([pair], 0.5, 0.2), 4 * (math.sqrt(0.5) + math.sqrt(0.2)))

    def test_applicability_from_model(self):
        model = PiecewiseVarModel(
            [20],
            [LowRankSparsePair(np.diag([0.5, 0.0]), np.diag([0.3, 0.2]), alpha_L=1.0),
             LowRankSparsePair(np.diag([0.5, 0.0]), np.diag([-0.3, 0.2]), alpha_L=1.0)],
            noise_std=0.1,
        )
        block = applicability(WeaklySparseConfig(q=0.5, R_q=10.0), model).to_dict()
        self.assertTrue(block['applicable'])
        self.assertAlmostEqual(block['radius_lower_bound'], 2 * (math.sqrt(0.5) + math.sqrt(0.3)) + 2 * math.sqrt(0.5))
        with self.assertLogs('surrogate.utils', level='WARNING'):
            self.assertFalse(applicability(WeaklySparseConfig(q=0.5, R_q=1.0), model).applicable)


class ThresholdSupportTests(SimpleTestCase):
    def test_example(self):
        A = np.array([[0.3, 0.05], [0.0, 0.2]])
        self.assertEqual(threshold_support(A, 0.1), {(0, 0), (1, 1)})

    def test_extremes(self):
        A = np.array([[0.3, 0.05], [0.0, 0.2]])
        self.assertEqual(threshold_support(A, 0.31), set())
        self.assertEqual(threshold_support(A, 1e-12), {(0, 0), (0, 1), (1, 1)})

    def test_cardinality_bound(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            A = rng.normal(scale=0.5, size=(5, 5)) * (rng.uniform(size=(5, 5)) < 0.5)
            for eta in (0.01, 0.1, 0.5):
                for q in (0.2, 0.4, 0.9):
                    self.assertLessEqual(len(threshold_support(A, eta)), lq_norm_q(A, q) * eta ** -q + 1e-9)

    def test_rejects_nonpositive_eta(self):
        with self.assertRaises(InvalidInputError):
            threshold_support(np.eye(2), 0.0)


class ConfigTests(SimpleTestCase):
    def test_defaults(self):
        config = WeaklySparseConfig()
        self.assertEqual(config.q, 0.4)
        self.assertAlmostEqual(config.eta_for(0.2), 0.01)

    def test_rejections(self):
        for kwargs in ({'q': 1.0}, {'q': 0.0}, {'R_q': 0.0}, {'eta': 0.0}, {'lambda_w': -1.0}):
            with self.assertRaises(InvalidInputError):
                WeaklySparseConfig(**kwargs)


class SurrogateSingleTests(SimpleTestCase):
    def test_noise_free_change_recovered(self):
        values = np.empty((40, 2))
        values[0] = [1000.0, 500.0]
        for t in range(1, 40):
            values[t] = (ROTATION if t < 20 else SHEAR) @ values[t - 1]
        detection = surrogate_detect_single(TimeSeriesData(values), SearchDomain(3, 37))
        self.assertEqual(detection.tau_hat, 20)
        self.assertEqual(detection.method, 'surrogate')

    def test_default_domain(self):
        width = math.floor((math.log(300) / 300) ** -0.2)
        domain = default_surrogate_domain(300, 20, 1.0, 0.4)
        self.assertEqual((domain.lower, domain.upper), (width, 300 - width))
        self.assertEqual(default_surrogate_domain(300, 20, 100.0, 0.4), SearchDomain(30, 270))

    def test_switching_regimes(self):
        data = switching_series(120, [60], seed=4)
        detection = surrogate_detect_single(data, SearchDomain(10, 110))
        self.assertLessEqual(abs(detection.tau_hat - 60), 3)

    def test_both_sides_weighted_with_c0_w(self):
        data = switching_series(60, [30], seed=2)
        config = WeaklySparseConfig(c0_w=0.7)
        with mock.patch('surrogate.utils.surrogate_weight', wraps=surrogate_weight) as weight:
            weakly_sparse_pair_fitter(config)(data, 30)
        self.assertEqual([call.args for call in weight.call_args_list], [(29, 2, 0.7), (30, 2, 0.7)])

    def test_degenerate_segment_names_the_cost(self):
        cost = WeaklySparseCost(switching_series(30, [], seed=0))
        with self.assertRaisesRegex(DegenerateIntervalError, '^weakly_sparse segment'):
            cost.fit(5, 6)


class SurrogateMultiTests(SimpleTestCase):
    def test_recovers_single_change_with_report_blocks(self):
        data = switching_series(200, [100], seed=12)
        detection = surrogate_detect_multi(data, plan_windows(200, 60, 15))
        self.assertEqual(detection.method, 'surrogate')
        self.assertEqual(detection.m_hat, 1)
        self.assertLessEqual(abs(detection.change_points[0] - 100), 3)
        report = detection.to_dict(data.T)
        self.assertEqual(set(report['applicability']), {'q', 'R_q', 'radius_lower_bound', 'applicable', 'source'})
        self.assertEqual(len(report['thresholded_support']), 2)

    def test_pure_noise_with_large_omega_is_empty(self):
        data = switching_series(200, [], seed=13)
        detection = surrogate_detect_multi(data, plan_windows(200, 60, 15), omega_T=1e6)
        self.assertEqual(detection.change_points, [])

    def test_agrees_with_full_model_on_sparse_changes(self):
        data = switching_series(240, [80, 160], seed=21)
        plan = plan_windows(240, 60, 15)
        surrogate = surrogate_detect_multi(data, plan)
        full = two_step_detect(data, 60, 15)
        self.assertEqual(surrogate.m_hat, full.m_hat)
        for a, b in zip(surrogate.change_points, full.change_points):
            self.assertLessEqual(abs(a - b), 0.01 * data.T)


class CombinedStrategyTests(SimpleTestCase):
    def test_merge_keeps_primary_points(self):
        self.assertEqual(merge_within([50, 100], [52, 75, 140], 5), [50, 75, 100, 140])
        self.assertEqual(merge_within([50], [], 5), [50])

    def test_contains_surrogate_points(self):
        data = switching_series(200, [100], seed=12)
        combined = combined_strategy(data, 60, 15)
        self.assertEqual(combined.method, 'combined')
        self.assertTrue(set(combined.extra['surrogate_change_points']) <= set(combined.change_points))
        self.assertEqual(len(combined.segment_fits), combined.m_hat + 1)

    def test_no_change_anywhere(self):
        data = switching_series(200, [], seed=14)
        combined = combined_strategy(data, 60, 15, omega_T=1e6, full_omega_T=1e6)
        self.assertEqual(combined.change_points, [])
