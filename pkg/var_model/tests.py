import json

import numpy as np
from django.test import SimpleTestCase

from lsvar.exceptions import InvalidInputError, UndefinedMetricError, UnstableModelError
from .domain import LowRankSparsePair, PiecewiseVarModel, TimeSeriesData
from .utils import (
    build_low_rank_component,
    check_stability,
    information_ratio,
    project_onto_omega,
    simulate_piecewise_var,
    spectral_radius,
)


def _pair(A, alpha_L=np.inf):
    A = np.asarray(A, dtype=float)
    return LowRankSparsePair(np.zeros_like(A), A, alpha_L)


class TimeSeriesDataTests(SimpleTestCase):
    def test_shape_properties(self):
        data = TimeSeriesData(np.zeros((5, 3)))
        self.assertEqual((data.T, data.p), (5, 3))

    def test_vector_becomes_single_column(self):
        self.assertEqual(TimeSeriesData(np.arange(4.0)).p, 1)

    def test_rejects_non_finite(self):
        values = np.zeros((4, 2))
        values[2, 1] = np.nan
        with self.assertRaisesMessage(InvalidInputError, 'row 2, column 1'):
            TimeSeriesData(values)

    def test_rejects_single_observation(self):
        with self.assertRaises(InvalidInputError):
            TimeSeriesData(np.zeros((1, 2)))


class SimulationTests(SimpleTestCase):
    def test_noise_free_zero_start_stays_at_zero(self):
        model = PiecewiseVarModel([5], [_pair(0.5 * np.eye(2)), _pair(-0.3 * np.eye(2))], noise_std=0.0)
        data = simulate_piecewise_var(model, 12, seed=3)
        self.assertEqual(data.values.shape, (12, 2))
        self.assertTrue(np.all(data.values == 0.0))

    def test_same_seed_is_bit_identical(self):
        model = PiecewiseVarModel([20], [_pair(0.4 * np.eye(3)), _pair(-0.4 * np.eye(3))], noise_std=0.1)
        first = simulate_piecewise_var(model, 50, seed=11)
        second = simulate_piecewise_var(model, 50, seed=11)
        np.testing.assert_array_equal(first.values, second.values)
        third = simulate_piecewise_var(model, 50, seed=12)
        self.assertFalse(np.array_equal(first.values, third.values))

    def test_lag_one_autocovariance_follows_transition(self):
        model = PiecewiseVarModel([], [_pair(0.5 * np.eye(2))], noise_std=0.1)
        X = simulate_piecewise_var(model, 10000, seed=2024).values
        X = X - X.mean(axis=0)
        gamma0 = X[:-1].T @ X[:-1] / (len(X) - 1)
        gamma1 = X[1:].T @ X[:-1] / (len(X) - 1)
        for k in range(2):
            self.assertAlmostEqual(gamma1[k, k] / gamma0[k, k], 0.5, delta=0.025)

    def test_residuals_inside_segments_match_noise_level(self):
        A1 = np.array([[0.5, 0.2], [0.0, 0.3]])
        A2 = np.array([[-0.4, 0.0], [0.1, 0.6]])
        model = PiecewiseVarModel([3000], [_pair(A1), _pair(A2)], noise_std=0.2)
        X = simulate_piecewise_var(model, 6000, seed=5).values
        left = X[1:3000] - X[:2999] @ A1.T
        right = X[3001:] - X[3000:-1] @ A2.T
        for residuals in (left, right):
            self.assertAlmostEqual(residuals.var() / 0.04, 1.0, delta=0.1)

    def test_change_point_index_uses_right_model_from_tau(self):
        model = PiecewiseVarModel([4], [_pair(np.eye(1) * 0.5), _pair(np.eye(1) * -0.5)], noise_std=0.0)
        self.assertEqual(model.segment_index(3), 0)
        self.assertEqual(model.segment_index(4), 1)

    def test_rejects_horizon_before_last_change_point(self):
        model = PiecewiseVarModel([10], [_pair(0.1 * np.eye(2)), _pair(0.2 * np.eye(2))], noise_std=0.1)
        with self.assertRaises(InvalidInputError):
            simulate_piecewise_var(model, 10, seed=0)

    def test_unstable_segment_is_named(self):
        with self.assertRaises(UnstableModelError) as ctx:
            PiecewiseVarModel([5], [_pair(0.5 * np.eye(2)), _pair(1.2 * np.eye(2))], noise_std=0.1)
        self.assertEqual(ctx.exception.segment, 1)
        self.assertIn('Segment 1', str(ctx.exception))


class LowRankComponentTests(SimpleTestCase):
    def test_rank_zero_is_zero_matrix(self):
        np.testing.assert_array_equal(build_low_rank_component(0, 4, 0, []), np.zeros((4, 4)))

    def test_full_rank_unit_values_give_identity(self):
        L = build_low_rank_component(7, 5, 5, [1.0] * 5)
        np.testing.assert_allclose(L, np.eye(5), atol=1e-12)

    def test_rank_two_has_requested_singular_values(self):
        L = build_low_rank_component(1, 5, 2, [0.8, 0.3])
        singular_values = np.linalg.svd(L, compute_uv=False)
        self.assertEqual(int(np.sum(singular_values > 1e-10)), 2)
        np.testing.assert_allclose(singular_values[:2], [0.8, 0.3], atol=1e-12)
        np.testing.assert_allclose(L, L.T, atol=1e-12)

    def test_rank_above_dimension_rejected(self):
        with self.assertRaises(InvalidInputError):
            build_low_rank_component(0, 3, 4, [1, 1, 1, 1])


class StabilityTests(SimpleTestCase):
    def test_examples(self):
        self.assertTrue(check_stability(0.9 * np.eye(3)))
        self.assertFalse(check_stability(np.eye(3)))
        self.assertTrue(check_stability(np.array([[0.5, 0.6], [0.0, 0.5]])))

    def test_agrees_with_eigenvalues(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            A = rng.normal(scale=0.4, size=(4, 4))
            expected = np.max(np.abs(np.linalg.eigvals(A))) < 1 - 1e-8
            self.assertEqual(check_stability(A), expected)

    def test_non_square_rejected(self):
        with self.assertRaises(InvalidInputError):
            spectral_radius(np.zeros((2, 3)))


class InformationRatioTests(SimpleTestCase):
    def test_zero_low_rank(self):
        self.assertEqual(information_ratio(LowRankSparsePair(np.zeros((2, 2)), np.eye(2))), 0.0)

    def test_scenario_ratio(self):
        L = np.full((2, 2), 0.05)
        S = np.array([[0.0, 0.2], [0.0, 0.0]])
        self.assertAlmostEqual(information_ratio(LowRankSparsePair(L, S)), 0.25)

    def test_equal_components(self):
        M = np.array([[0.1, -0.3], [0.2, 0.0]])
        self.assertAlmostEqual(information_ratio(LowRankSparsePair(M, M.copy())), 1.0)

    def test_zero_sparse_undefined(self):
        with self.assertRaises(UndefinedMetricError):
            information_ratio(LowRankSparsePair(np.eye(2) * 0.1, np.zeros((2, 2))))


class PairSummaryTests(SimpleTestCase):
    def test_rank_density_and_spikiness(self):
        u = np.array([0.6, 0.8])
        pair = LowRankSparsePair(0.5 * np.outer(u, u), np.array([[0.0, 0.3], [-0.01, 0.0]]), alpha_L=1.0)
        self.assertEqual(pair.rank(), 1)
        self.assertEqual(pair.density(), 2)
        self.assertEqual(pair.density(threshold=0.05), 1)
        self.assertAlmostEqual(pair.spikiness, 2 * 0.5 * 0.64)

    def test_zero_low_rank_has_rank_zero(self):
        pair = LowRankSparsePair(np.zeros((3, 3)), np.eye(3))
        self.assertEqual((pair.rank(), pair.density(), pair.spikiness), (0, 3, 0.0))


class OmegaProjectionTests(SimpleTestCase):
    def test_inside_unchanged(self):
        L = np.array([[0.1, -0.2], [0.3, 0.0]])
        np.testing.assert_array_equal(project_onto_omega(L, 1.0), L)

    def test_zero_radius(self):
        np.testing.assert_array_equal(project_onto_omega(np.ones((3, 3)), 0.0), np.zeros((3, 3)))

    def test_clip_value(self):
        self.assertEqual(project_onto_omega(np.array([[0.7, 0.0], [0.0, 0.0]]), 1.0)[0, 0], 0.5)

    def test_idempotent_and_nonexpansive(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            L1, L2 = rng.normal(size=(2, 4, 4))
            alpha = rng.uniform(0.0, 3.0)
            P1, P2 = project_onto_omega(L1, alpha), project_onto_omega(L2, alpha)
            np.testing.assert_array_equal(project_onto_omega(P1, alpha), P1)
            self.assertLessEqual(np.linalg.norm(P1 - P2), np.linalg.norm(L1 - L2) + 1e-12)

    def test_pair_rejects_low_rank_outside_omega(self):
        with self.assertRaises(InvalidInputError):
            LowRankSparsePair(np.eye(2), np.zeros((2, 2)), alpha_L=1.0)


class ModelDocumentTests(SimpleTestCase):
    def test_json_document_round_trip(self):
        model = PiecewiseVarModel(
            [6],
            [LowRankSparsePair(0.1 * np.eye(2), np.array([[0, 0.3], [0, 0]]), 1.0),
             LowRankSparsePair(-0.1 * np.eye(2), np.array([[0, -0.3], [0, 0]]), 1.0)],
            noise_std=0.1,
        )
        payload = json.loads(json.dumps(model.to_dict()))
        self.assertEqual(set(payload), {'p', 'sigma', 'change_points', 'segments', 'alpha_L',
                                        'max_sparse_magnitude', 'metadata'})
        restored = PiecewiseVarModel.from_dict(payload)
        self.assertEqual(restored.change_points, [6])
        np.testing.assert_array_equal(restored.segments[1].S, model.segments[1].S)
        self.assertAlmostEqual(restored.max_sparse_magnitude, 0.3)

    def test_jump_sizes_are_spectral_norms(self):
        model = PiecewiseVarModel([5], [_pair(0.2 * np.eye(2)), _pair(-0.3 * np.eye(2))], noise_std=0.1)
        self.assertAlmostEqual(model.jump_sizes()[0], 0.5)
        self.assertAlmostEqual(model.jump_sizes('lowrank')[0], 0.0)

    def test_malformed_document_rejected(self):
        with self.assertRaises(InvalidInputError):
            PiecewiseVarModel.from_dict({'segments': []})
