import math

import numpy as np
from django.test import SimpleTestCase

from lsvar.exceptions import DegenerateIntervalError, InvalidInputError, SolverDivergenceError
from var_model.domain import LowRankSparsePair, PiecewiseVarModel, TimeSeriesData
from var_model.utils import simulate_piecewise_var
from .domain import FitResult, PenaltyConfig, SolverOptions
from .prox import singular_value_threshold, soft_threshold
from .utils import (
    default_alpha_l,
    default_grid,
    estimate_rank,
    fit_lowrank_sparse,
    fit_weakly_sparse,
    grid_prediction_errors,
    ols_transition,
    search_phase_tuning,
    segment_phase_tuning,
    select_tuning_constants,
    transition_pairs,
    tuning_grid_search,
)

TIGHT = dict(max_iterations=20000, rel_tolerance=1e-30)


def _series(A, T, seed, sigma=1.0):
    A = np.asarray(A, dtype=float)
    model = PiecewiseVarModel([], [LowRankSparsePair(np.zeros_like(A), A)], noise_std=sigma)
    return simulate_piecewise_var(model, T, seed)


def _lasso_oracle(data, lambda_, sweeps=3000):
    """Cyclic coordinate descent on (1/n)||Y - Z A'||^2 + lambda |A|_1, row by row."""
    Z, Y = data.values[:-1], data.values[1:]
    n, p = Z.shape
    A = np.zeros((p, p))
    col_norms = np.sum(Z * Z, axis=0)
    for i in range(p):
        a = np.zeros(p)
        for _ in range(sweeps):
            for j in range(p):
                partial = Y[:, i] - Z @ a + Z[:, j] * a[j]
                rho = Z[:, j] @ partial
                a[j] = np.sign(rho) * max(abs(rho) - n * lambda_ / 2, 0) / col_norms[j]
        A[i] = a
    return A


class SoftThresholdTests(SimpleTestCase):
    def test_examples(self):
        self.assertAlmostEqual(float(soft_threshold(0.5, 0.2)), 0.3)
        self.assertEqual(float(soft_threshold(-0.1, 0.2)), 0.0)
        self.assertEqual(float(soft_threshold(-1.7, 0.0)), -1.7)

    def test_matches_scalar_prox_optimality(self):
        rng = np.random.default_rng(0)
        for x, lam in zip(rng.normal(scale=2, size=1000), rng.uniform(0, 2, size=1000)):
            z = float(soft_threshold(x, lam))
            if z == 0.0:
                self.assertLessEqual(abs(x), lam + 1e-12)
            else:
                self.assertAlmostEqual(z - x + lam * np.sign(z), 0.0, places=12)

    def test_negative_threshold_rejected(self):
        with self.assertRaises(InvalidInputError):
            soft_threshold(1.0, -0.1)


class SingularValueThresholdTests(SimpleTestCase):
    def test_diagonal_example(self):
        np.testing.assert_allclose(singular_value_threshold(np.diag([3.0, 1.0]), 2.0), np.diag([1.0, 0.0]),
                                   atol=1e-12)

    def test_zero_threshold_and_large_threshold(self):
        M = np.random.default_rng(1).normal(size=(4, 4))
        np.testing.assert_array_equal(singular_value_threshold(M, 0.0), M)
        sigma_max = np.linalg.norm(M, 2)
        np.testing.assert_array_equal(singular_value_threshold(M, sigma_max), np.zeros((4, 4)))

    def test_nuclear_prox_optimality(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            M = rng.normal(size=(5, 5))
            tau = rng.uniform(0.1, 2.0)
            Y = singular_value_threshold(M, tau)
            expected = np.sum(np.maximum(np.linalg.svd(M, compute_uv=False) - tau, 0))
            self.assertAlmostEqual(np.linalg.norm(Y, 'nuc'), expected, places=8)
            G = (M - Y) / tau
            # G is a subgradient of the nuclear norm at Y.
            self.assertLessEqual(np.linalg.norm(G, 2), 1 + 1e-8)
            self.assertLess(abs(np.sum(G * Y) - np.linalg.norm(Y, 'nuc')), 1e-8)

    def test_non_finite_rejected(self):
        with self.assertRaises(InvalidInputError):
            singular_value_threshold(np.array([[np.inf, 0], [0, 1]]), 0.5)


class FitLowRankSparseTests(SimpleTestCase):
    def test_zero_penalties_match_least_squares(self):
        data = _series([[0.5, 0.1], [0.0, 0.4]], 30, seed=4)
        fit = fit_lowrank_sparse(data, (0, 30), PenaltyConfig(), SolverOptions(**TIGHT))
        self.assertLess(np.linalg.norm(fit.transition - ols_transition(data, (0, 30))), 1e-6)

    def test_zero_data_gives_zero_fit(self):
        data = TimeSeriesData(np.zeros((20, 3)))
        fit = fit_lowrank_sparse(data, (0, 20), PenaltyConfig(lambda_=0.1, mu=0.1, alpha_L=1.0))
        np.testing.assert_array_equal(fit.L_hat, np.zeros((3, 3)))
        np.testing.assert_array_equal(fit.S_hat, np.zeros((3, 3)))
        self.assertTrue(fit.converged)

    def test_objective_never_increases(self):
        rng = np.random.default_rng(5)
        A = 0.3 * np.eye(4) + 0.1 * np.outer(rng.normal(size=4), rng.normal(size=4))
        data = _series(A, 80, seed=6, sigma=0.5)
        fit = fit_lowrank_sparse(data, (0, 80), PenaltyConfig(lambda_=0.05, mu=0.1, alpha_L=2.0))
        self.assertTrue(all(b <= a + 1e-10 for a, b in zip(fit.history, fit.history[1:])))

    def test_low_rank_stays_inside_omega(self):
        rng = np.random.default_rng(7)
        data = TimeSeriesData(np.cumsum(rng.normal(size=(60, 3)), axis=0) * 0.1)
        fit = fit_lowrank_sparse(data, (0, 60), PenaltyConfig(lambda_=0.5, mu=0.01, alpha_L=0.3))
        self.assertLessEqual(np.max(np.abs(fit.L_hat)), 0.1)

    def test_kkt_conditions_for_sparse_part(self):
        data = _series([[0.6, 0.0, 0.2], [0.0, -0.3, 0.0], [0.1, 0.0, 0.4]], 50, seed=8)
        lam = 0.05
        fit = fit_lowrank_sparse(data, (0, 50), PenaltyConfig(lambda_=lam, mu=1e6), SolverOptions(**TIGHT))
        np.testing.assert_array_equal(fit.L_hat, np.zeros((3, 3)))
        Z, Y = transition_pairs(data, (0, 50))
        grad = (2.0 / Z.shape[0]) * (fit.S_hat @ (Z.T @ Z) - Y.T @ Z)
        zero = fit.S_hat == 0
        self.assertTrue(np.all(np.abs(grad[zero]) <= lam + 1e-4))
        self.assertTrue(np.all(np.abs(grad[~zero] + lam * np.sign(fit.S_hat[~zero])) <= 1e-4))

    def test_sparse_only_fit_matches_coordinate_descent(self):
        rng = np.random.default_rng(10)
        for instance in range(50):
            p = int(rng.integers(1, 4))
            T = int(rng.integers(20, 51))
            A = np.diag(rng.uniform(-0.6, 0.6, size=p))
            data = _series(A, T, seed=100 + instance)
            lam = float(rng.uniform(0.01, 0.2))
            fit = fit_lowrank_sparse(data, (0, T), PenaltyConfig(lambda_=lam, mu=0.0, alpha_L=0.0),
                                     SolverOptions(**TIGHT))
            self.assertLess(np.linalg.norm(fit.S_hat - _lasso_oracle(data, lam)), 1e-4)

    def test_short_interval_rejected(self):
        data = TimeSeriesData(np.ones((10, 2)))
        with self.assertRaises(DegenerateIntervalError):
            fit_lowrank_sparse(data, (3, 5), PenaltyConfig())

    def test_divergence_reports_partial_result(self):
        data = _series([[0.5, 0.0], [0.0, 0.5]], 40, seed=3)
        with self.assertRaises(SolverDivergenceError) as ctx:
            fit_lowrank_sparse(data, (0, 40), PenaltyConfig(), SolverOptions(step_size=50.0))
        self.assertIsInstance(ctx.exception.partial, FitResult)

    def test_report_fields(self):
        data = _series([[0.5, 0.1], [0.0, 0.4]], 40, seed=1)
        payload = fit_lowrank_sparse(data, (0, 40), PenaltyConfig(lambda_=0.01, mu=0.01)).to_dict()
        self.assertEqual(set(payload), {'L', 'S', 'objective', 'iterations', 'converged',
                                        'rank_estimate', 'sparse_support_size'})


class WeaklySparseTests(SimpleTestCase):
    def test_zero_penalty_is_least_squares(self):
        data = _series([[0.4, 0.2], [-0.1, 0.3]], 40, seed=12)
        A = fit_weakly_sparse(data, (0, 40), 0.0, SolverOptions(**TIGHT))
        self.assertLess(np.linalg.norm(A - ols_transition(data, (0, 40))), 1e-6)

    def test_null_condition_gives_zero(self):
        data = _series([[0.4, 0.2], [-0.1, 0.3]], 40, seed=13)
        Z, Y = transition_pairs(data, (0, 40))
        lam = np.max(np.abs(2.0 / Z.shape[0] * (Y.T @ Z)))
        np.testing.assert_array_equal(fit_weakly_sparse(data, (0, 40), lam), np.zeros((2, 2)))

    def test_matches_coordinate_descent(self):
        rng = np.random.default_rng(14)
        for instance in range(20):
            p = int(rng.integers(1, 4))
            data = _series(np.diag(rng.uniform(-0.5, 0.5, size=p)), 45, seed=200 + instance)
            lam = float(rng.uniform(0.01, 0.2))
            A = fit_weakly_sparse(data, (0, 45), lam, SolverOptions(**TIGHT))
            self.assertLess(np.linalg.norm(A - _lasso_oracle(data, lam)), 1e-4)


class TuningFormulaTests(SimpleTestCase):
    def test_search_phase_symbolic_case(self):
        config = PenaltyConfig(c0=1.0, c0_prime=1.0)
        # p = 3, tau - 1 = 3 reduces the lambda formula to 4*sqrt(2 log 3 / 3).
        lambda1, _, _, _ = search_phase_tuning(4, 10, 3, config)
        self.assertAlmostEqual(lambda1, 4 * math.sqrt(2 * math.log(3) / 3))

    def test_search_phase_symmetric_at_midpoint(self):
        lambda1, mu1, lambda2, mu2 = search_phase_tuning(151, 301, 20, PenaltyConfig())
        self.assertAlmostEqual(lambda1, lambda2)
        self.assertAlmostEqual(mu1, mu2)

    def test_search_phase_numeric_case(self):
        lambda1, *_ = search_phase_tuning(150, 300, 20, PenaltyConfig(c0=0.5))
        self.assertAlmostEqual(lambda1, 2 * math.sqrt((math.log(20) + math.log(149)) / 149))
        self.assertAlmostEqual(lambda1, 0.463, delta=0.002)

    def test_search_phase_rejects_boundary(self):
        with self.assertRaises(InvalidInputError):
            search_phase_tuning(1, 10, 2, PenaltyConfig())
        with self.assertRaises(InvalidInputError):
            search_phase_tuning(10, 10, 2, PenaltyConfig())

    def test_segment_phase_examples(self):
        config = PenaltyConfig(c1=1.0, c1_prime=1.0)
        lambda_j, mu_j = segment_phase_tuning(4, 4, 0.0, config)
        self.assertAlmostEqual(lambda_j, 4 * math.sqrt(math.log(4) / 4))
        self.assertAlmostEqual(mu_j, 4.0)
        lambda_j, _ = segment_phase_tuning(140, 20, 1.0, PenaltyConfig(c1=0.5))
        self.assertAlmostEqual(lambda_j, 0.393, delta=0.001)

    def test_segment_phase_decreasing_in_length(self):
        config = PenaltyConfig(c1=0.3)
        values = [segment_phase_tuning(n, 10, 0.5, config)[0] for n in range(2, 200)]
        self.assertTrue(all(b < a for a, b in zip(values, values[1:])))

    def test_segment_phase_rejects_short_segment(self):
        with self.assertRaises(InvalidInputError):
            segment_phase_tuning(1, 3, 0.1, PenaltyConfig())

    def test_constants_outside_grid_range_rejected(self):
        with self.assertRaises(InvalidInputError):
            PenaltyConfig(c0=20.0)

    def test_default_alpha(self):
        self.assertAlmostEqual(default_alpha_l(20, 300, 0.5), 10 * math.sqrt(math.log(6000) / 300))


class GridSearchTests(SimpleTestCase):
    def setUp(self):
        A = np.zeros((3, 3))
        A[0, 1] = 0.6
        A[2, 2] = -0.5
        self.data = _series(A, 60, seed=21, sigma=0.3)

    def test_single_cell(self):
        self.assertEqual(select_tuning_constants(self.data, (0, 60), [(0.2, 0.4)]), (0.2, 0.4))

    def test_returns_the_minimum_cell(self):
        grid = default_grid(size=4, low=0.001, high=1.0)
        errors = grid_prediction_errors(self.data, (0, 60), grid)
        self.assertEqual(len(errors), 16)
        best = min(errors, key=lambda row: row[4])
        lambda_, mu = tuning_grid_search(self.data, (0, 60), grid)
        self.assertEqual((lambda_, mu), (best[2], best[3]))
        self.assertGreater(lambda_, 0)

    def test_ties_go_to_lexicographically_first_cell(self):
        zeros = TimeSeriesData(np.zeros((30, 2)))
        self.assertEqual(select_tuning_constants(zeros, (0, 30), [(2.0, 1.0), (1.0, 3.0), (1.0, 5.0)]),
                         (1.0, 3.0))

    def test_empty_grid_rejected(self):
        with self.assertRaises(InvalidInputError):
            tuning_grid_search(self.data, (0, 60), [])

    def test_short_interval_rejected(self):
        with self.assertRaises(InvalidInputError):
            tuning_grid_search(self.data, (0, 8), [(1.0, 1.0)])


class RankTests(SimpleTestCase):
    def test_examples(self):
        self.assertEqual(estimate_rank(np.zeros((3, 3)), 0.01), 0)
        self.assertEqual(estimate_rank(np.diag([1.0, 0.5, 1e-9]), 0.01), 2)
        self.assertEqual(estimate_rank(np.eye(4), 0.01), 4)

    def test_threshold_range(self):
        with self.assertRaises(InvalidInputError):
            estimate_rank(np.eye(2), 1.5)
