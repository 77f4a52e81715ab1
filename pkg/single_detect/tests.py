import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
from django.test import SimpleTestCase

from estimation.domain import FitResult, PenaltyConfig
from lsvar.exceptions import DegenerateIntervalError, DetectionError, InvalidInputError
from var_model.domain import LowRankSparsePair, PiecewiseVarModel, TimeSeriesData
from var_model.utils import simulate_piecewise_var
from .domain import SearchDomain
from .utils import (
    default_search_domain,
    exhaustive_search,
    is_flat_curve,
    ols_pair_fitter,
    refit_after_detection,
    remove_radius_neighborhood,
    split_objective,
    write_curve_tsv,
)

ROTATION = 0.95 * np.array([[np.cos(0.4), -np.sin(0.4)], [np.sin(0.4), np.cos(0.4)]])
SHEAR = np.array([[0.3, 0.8], [-0.6, 0.2]])


def _fit(A):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return FitResult(np.zeros_like(A), A, 0.0, 0, True)


def noise_free_piecewise(T=40, tau=20):
    values = np.empty((T, 2))
    values[0] = [1.0, 0.5]
    for t in range(1, T):
        A = ROTATION if t < tau else SHEAR
        values[t] = A @ values[t - 1]
    return TimeSeriesData(values)


class SplitObjectiveTests(SimpleTestCase):
    def test_hand_evaluated_toy(self):
        data = TimeSeriesData(np.array([[0.0], [1.0], [2.0]]))
        self.assertAlmostEqual(split_objective(data, 2, _fit(0.0), _fit(2.0)), 0.5)

    def test_zero_fits_give_mean_squared_norm(self):
        data = TimeSeriesData(np.random.default_rng(0).normal(size=(12, 3)))
        expected = np.sum(data.values[1:] ** 2) / 11
        self.assertAlmostEqual(split_objective(data, 6, _fit(np.zeros((3, 3))), _fit(np.zeros((3, 3)))),
                               expected)

    def test_exact_fits_give_zero(self):
        data = noise_free_piecewise()
        self.assertAlmostEqual(split_objective(data, 20, _fit(ROTATION), _fit(SHEAR)), 0.0, places=20)

    def test_rejects_tau_outside_series(self):
        with self.assertRaises(InvalidInputError):
            split_objective(noise_free_piecewise(), 1, _fit(ROTATION), _fit(SHEAR))


class SearchDomainTests(SimpleTestCase):
    def test_unit_sparsity_and_rank(self):
        domain = default_search_domain(100, 1, 1, 0.1)
        width = 2 ** 1.1
        self.assertEqual((domain.lower, domain.upper), (int(np.floor(width)), int(np.floor(100 - width))))

    def test_fallback(self):
        domain = default_search_domain(30, 10, 4, 0.1)
        self.assertEqual((domain.lower, domain.upper), (3, 27))

    def test_midpoint_is_centered(self):
        for T in (50, 101, 300):
            domain = default_search_domain(T, 2, 1, 0.2)
            self.assertLessEqual(abs((domain.lower + domain.upper) / 2 - T / 2), 1)

    def test_short_series_rejected(self):
        with self.assertRaises(InvalidInputError):
            default_search_domain(9, 1, 1, 0.1)

    def test_invalid_domain_rejected(self):
        with self.assertRaises(InvalidInputError):
            SearchDomain(5, 5)


class ExhaustiveSearchTests(SimpleTestCase):
    def test_noise_free_curve_strictly_minimized_at_change(self):
        data = noise_free_piecewise()
        detection = exhaustive_search(data, SearchDomain(3, 37), fit_pair=ols_pair_fitter)
        self.assertEqual(detection.tau_hat, 20)
        values = dict(detection.objective_curve)
        self.assertTrue(all(value > values[20] for tau, value in values.items() if tau != 20))

    def test_reversed_series_mirrors_change(self):
        data = noise_free_piecewise(T=40, tau=20)
        domain = SearchDomain(8, 32)
        forward = exhaustive_search(data, domain, fit_pair=ols_pair_fitter)
        backward = exhaustive_search(data.reversed(), domain, fit_pair=ols_pair_fitter)
        self.assertEqual(forward.tau_hat, 20)
        self.assertEqual(backward.tau_hat, data.T - forward.tau_hat + 1)
        self.assertTrue(data.reversed().metadata['reversed'])

    def test_argmin_is_smallest_minimizer(self):
        data = noise_free_piecewise()

        def constant_pair(data, tau):
            return _fit(np.zeros((2, 2))), _fit(np.zeros((2, 2)))

        detection = exhaustive_search(data, SearchDomain(5, 30), fit_pair=constant_pair)
        self.assertEqual(detection.tau_hat, 5)
        self.assertEqual(len(detection.objective_curve), 26)
        self.assertEqual(detection.tau_hat, min(tau for tau, value in detection.objective_curve
                                                if value == detection.minimum))

    def test_failed_taus_are_skipped_and_recorded(self):
        data = noise_free_piecewise()

        def flaky(data, tau):
            if tau in (10, 11):
                raise DegenerateIntervalError('forced')
            return ols_pair_fitter(data, tau)

        detection = exhaustive_search(data, SearchDomain(2, 37), fit_pair=flaky)
        self.assertEqual(detection.skipped, [2, 10, 11])
        self.assertEqual(len(detection.objective_curve), 36 - 3)
        self.assertEqual(detection.tau_hat, 20)

    def test_all_failures_raise(self):
        def broken(data, tau):
            raise DegenerateIntervalError('forced')

        with self.assertRaises(DetectionError):
            exhaustive_search(noise_free_piecewise(), SearchDomain(5, 8), fit_pair=broken)

    def test_penalized_search_is_deterministic(self):
        model = PiecewiseVarModel(
            [30],
            [LowRankSparsePair(np.zeros((2, 2)), 0.6 * np.eye(2)),
             LowRankSparsePair(np.zeros((2, 2)), -0.6 * np.eye(2))],
            noise_std=0.1,
        )
        data = simulate_piecewise_var(model, 60, seed=1)
        penalty = PenaltyConfig(alpha_L=1.0)
        first = exhaustive_search(data, SearchDomain(10, 50), penalty)
        second = exhaustive_search(data, SearchDomain(10, 50), penalty)
        self.assertEqual(first.objective_curve, second.objective_curve)
        self.assertLessEqual(abs(first.tau_hat - 30), 3)

    def test_single_regime_curve_is_flat(self):
        model = PiecewiseVarModel([], [LowRankSparsePair(np.zeros((2, 2)), 0.5 * np.eye(2))], noise_std=0.1)
        data = simulate_piecewise_var(model, 400, seed=4)
        detection = exhaustive_search(data, SearchDomain(80, 320), fit_pair=ols_pair_fitter)
        self.assertTrue(is_flat_curve(detection.objective_curve))

    def test_curve_exported_as_tsv(self):
        detection = exhaustive_search(noise_free_piecewise(), SearchDomain(3, 37), fit_pair=ols_pair_fitter)
        with tempfile.TemporaryDirectory() as tmp:
            path = write_curve_tsv(Path(tmp) / 'curve.tsv', detection.objective_curve)
            frame = pd.read_csv(path, sep='\t')
        self.assertEqual(list(frame.columns), ['tau', 'objective'])
        self.assertEqual(len(frame), 35)


class RadiusNeighborhoodTests(SimpleTestCase):
    def test_zero_radius(self):
        self.assertEqual(remove_radius_neighborhood(150, 0, 300), ((1, 150), (150, 300)))

    def test_arithmetic(self):
        self.assertEqual(remove_radius_neighborhood(150, 10, 300), ((1, 140), (160, 300)))

    def test_degenerate(self):
        with self.assertRaises(DegenerateIntervalError):
            remove_radius_neighborhood(20, 19, 300)
        with self.assertRaises(DegenerateIntervalError):
            remove_radius_neighborhood(290, 10, 300)

    def test_refit_uses_both_sides(self):
        model = PiecewiseVarModel(
            [50],
            [LowRankSparsePair(np.zeros((2, 2)), 0.5 * np.eye(2)),
             LowRankSparsePair(np.zeros((2, 2)), -0.5 * np.eye(2))],
            noise_std=0.1,
        )
        data = simulate_piecewise_var(model, 100, seed=2)
        left, right = refit_after_detection(data, 50, 5, PenaltyConfig(alpha_L=0.5))
        self.assertEqual((left.n_pairs, right.n_pairs), (44, 45))
        self.assertGreater(left.transition[0, 0], 0)
        self.assertLess(right.transition[0, 0], 0)
