import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from estimation.domain import PenaltyConfig, SolverOptions
from estimation.utils import fit_lowrank_sparse, interval_tuning
from lsvar.exceptions import DegenerateIntervalError, InvalidInputError
from single_detect.domain import SearchDomain
from single_detect.utils import exhaustive_search, ols_pair_fitter
from var_model.domain import LowRankSparsePair, PiecewiseVarModel, TimeSeriesData
from var_model.utils import simulate_piecewise_var
from .costs import LowRankSparseCost
from .domain import Candidate, MultiDetection
from .utils import (
    backward_elimination,
    dp_detect,
    information_criterion,
    merge_candidates,
    omega_from_jumps,
    plan_windows,
    refine_change_points,
    refined_interval,
    rolling_window_candidates,
    select_omega,
    select_window_size,
    two_step_detect,
    write_window_curves,
)

ROTATION = 0.95 * np.array([[np.cos(0.4), -np.sin(0.4)], [np.sin(0.4), np.cos(0.4)]])
SHEAR = np.array([[0.3, 0.8], [-0.6, 0.2]])
TIGHT = SolverOptions(max_iterations=20000, rel_tolerance=1e-14)


def switching_series(T, change_points, seed, scale=0.8, noise=0.1):
    """Diagonal regimes alternating between +scale*I and -scale*I."""
    segments = [
        LowRankSparsePair(np.zeros((2, 2)), (-1) ** j * scale * np.eye(2))
        for j in range(len(change_points) + 1)
    ]
    model = PiecewiseVarModel(list(change_points), segments, noise_std=noise)
    return simulate_piecewise_var(model, T, seed=seed)


def noise_free_piecewise(T=40, tau=20):
    values = np.empty((T, 2))
    values[0] = [1.0, 0.5]
    for t in range(1, T):
        values[t] = (ROTATION if t < tau else SHEAR) @ values[t - 1]
    return TimeSeriesData(values)


def ols_search(window_data, domain):
    return exhaustive_search(window_data, domain, fit_pair=ols_pair_fitter, method='ols')


class PlanWindowsTests(SimpleTestCase):
    def test_single_window_when_h_equals_T(self):
        self.assertEqual(plan_windows(50, 50, 10).windows, [(1, 50)])

    def test_right_aligned_enumeration(self):
        self.assertEqual(plan_windows(10, 4, 2).windows, [(1, 4), (3, 6), (5, 8), (7, 10)])

    def test_final_window_ends_at_T(self):
        plan = plan_windows(23, 8, 3)
        self.assertEqual(plan.windows[0][0], 1)
        self.assertEqual(plan.windows[-1], (16, 23))

    def test_coverage(self):
        for T, h, l in ((10, 4, 2), (100, 20, 5), (101, 30, 15), (57, 6, 1), (300, 300, 1)):
            self.assertTrue(plan_windows(T, h, l).covers(T), (T, h, l))

    def test_rejections(self):
        with self.assertRaises(InvalidInputError):
            plan_windows(10, 11, 2)
        with self.assertRaises(InvalidInputError):
            plan_windows(10, 4, 0)
        with self.assertRaises(InvalidInputError):
            plan_windows(10, 4, 3)


class CandidateTests(SimpleTestCase):
    def test_merge_keeps_lower_objective(self):
        entries = [Candidate(10, (1, 20), 2.0), Candidate(12, (5, 25), 1.0), Candidate(30, (20, 40), 3.0)]
        self.assertEqual([entry.tau for entry in merge_candidates(entries, 5)], [12, 30])

    def test_single_window_reduces_to_single_search(self):
        data = noise_free_piecewise()
        candidates = rolling_window_candidates(data, plan_windows(40, 40, 10), search=ols_search)
        single = exhaustive_search(data, SearchDomain(3, 38), fit_pair=ols_pair_fitter)
        self.assertEqual(candidates.candidates, [single.tau_hat])
        self.assertEqual(candidates.candidates, [20])

    def test_candidates_lie_in_their_windows(self):
        data = switching_series(150, [75], seed=3)
        candidates = rolling_window_candidates(data, plan_windows(150, 40, 10), search=ols_search)
        self.assertEqual(candidates.candidates, sorted(set(candidates.candidates)))
        for entry in candidates.entries:
            self.assertTrue(entry.window[0] <= entry.tau < entry.window[1])

    def test_short_windows_rejected(self):
        with self.assertRaises(InvalidInputError):
            rolling_window_candidates(noise_free_piecewise(), plan_windows(40, 5, 2), search=ols_search)

    def test_window_curves_written(self):
        data = switching_series(100, [50], seed=5)
        plan = plan_windows(100, 30, 10)
        candidates = rolling_window_candidates(data, plan, search=ols_search)
        with tempfile.TemporaryDirectory() as tmp:
            paths = write_window_curves(Path(tmp), candidates)
            self.assertEqual(len(paths), len(plan.windows))
            self.assertTrue(all(path.exists() for path in paths))


class InformationCriterionTests(SimpleTestCase):
    def setUp(self):
        self.data = switching_series(60, [30], seed=1)

    def test_no_breakpoints_is_global_fit(self):
        penalty = PenaltyConfig()
        lambda_, mu = interval_tuning(59, 2, penalty.c0, penalty.c0_prime)
        fit = fit_lowrank_sparse(self.data, (0, 60), penalty.with_weights(lambda_, mu))
        self.assertAlmostEqual(information_criterion(self.data, [], omega_T=5.0), fit.penalized_cost)

    def test_omega_counts_per_breakpoint(self):
        cost = LowRankSparseCost(self.data)
        base = information_criterion(self.data, [30], cost=cost)
        self.assertAlmostEqual(information_criterion(self.data, [30], omega_T=2.5, cost=cost), base + 2.5)

    def test_spurious_breakpoint_rejected_once_omega_exceeds_reduction(self):
        data = noise_free_piecewise(T=60, tau=60)
        cost = LowRankSparseCost(data)
        reduction = cost.objective([]) - cost.objective([30])
        omega = max(reduction, 0.0) + 1e-3
        self.assertGreater(information_criterion(data, [30], omega_T=omega, cost=cost),
                           information_criterion(data, [], omega_T=omega, cost=cost))

    def test_unpenalized_nested_partitions_do_not_increase(self):
        one = information_criterion(self.data, [], penalties=[(0.0, 0.0)], opts=TIGHT)
        two = information_criterion(self.data, [30], penalties=[(0.0, 0.0)] * 2, opts=TIGHT)
        three = information_criterion(self.data, [20, 30], penalties=[(0.0, 0.0)] * 3, opts=TIGHT)
        self.assertLessEqual(two, one + 1e-8)
        self.assertLessEqual(three, two + 1e-8)

    def test_degenerate_segments_rejected(self):
        with self.assertRaises(DegenerateIntervalError):
            information_criterion(self.data, [2])
        with self.assertRaises(DegenerateIntervalError):
            information_criterion(self.data, [30, 31])
        with self.assertRaises(InvalidInputError):
            information_criterion(self.data, [60])

    def test_degenerate_segment_names_the_cost(self):
        with self.assertRaisesRegex(DegenerateIntervalError, r'^lowrank_sparse segment \[30, 31\)'):
            LowRankSparseCost(self.data).fit(30, 31)


class BackwardEliminationTests(SimpleTestCase):
    def test_near_duplicate_candidates_collapse_to_one(self):
        data = switching_series(120, [60], seed=7)
        detection = backward_elimination(data, [58, 62], omega_T=1.0)
        self.assertEqual(detection.m_hat, 1)
        self.assertIn(detection.change_points[0], (58, 62))
        self.assertEqual(len(detection.segment_fits), 2)

    def test_pure_noise_with_large_omega_is_empty(self):
        data = switching_series(120, [], seed=8)
        detection = backward_elimination(data, [30, 60, 90], omega_T=1e6)
        self.assertEqual(detection.change_points, [])
        self.assertEqual(len(detection.segment_fits), 1)
        self.assertEqual(sorted(detection.trace.removed), [30, 60, 90])

    def test_trace_is_contractive(self):
        data = switching_series(120, [60], seed=9)
        detection = backward_elimination(data, [20, 45, 60, 95], omega_T=0.5)
        self.assertTrue(set(detection.change_points) <= {20, 45, 60, 95})
        steps = [set(retained) for retained, _ in detection.trace.ic_values]
        for before, after in zip(steps, steps[1:]):
            self.assertLess(after, before)
            self.assertEqual(len(before - after), 1)
        self.assertEqual(steps[-1], set(detection.change_points))

    def test_larger_omega_never_keeps_more(self):
        data = switching_series(120, [60], seed=10)
        cost = LowRankSparseCost(data)
        counts = [
            backward_elimination(data, [25, 50, 60, 80, 100], omega, cost=cost).m_hat
            for omega in (0.0, 0.05, 0.2, 1.0, 5.0, 50.0)
        ]
        self.assertEqual(counts, sorted(counts, reverse=True))

    def test_report_shape(self):
        data = switching_series(120, [60], seed=7)
        report = backward_elimination(data, [58, 62], omega_T=1.0).to_dict(data.T)
        self.assertEqual(report['m_hat'], 1)
        self.assertEqual(len(report['per_segment']), 2)
        self.assertEqual(report['per_segment'][0]['interval'][0], 1)
        self.assertEqual(report['per_segment'][-1]['interval'][1], 120)

    def test_empty_candidates_rejected(self):
        with self.assertRaises(InvalidInputError):
            backward_elimination(switching_series(60, [], seed=1), [], omega_T=1.0)


class OmegaSelectionTests(SimpleTestCase):
    def test_separated_jumps(self):
        selection = omega_from_jumps([55.0, 1.0, 50.0, 1.1])
        self.assertEqual(selection.omega, 50.0)
        self.assertTrue(selection.separated)
        self.assertLess(selection.screening_omega, 50.0)

    def test_equal_jumps_return_max(self):
        selection = omega_from_jumps([3.0, 3.0, 3.0])
        self.assertEqual((selection.omega, selection.ratio, selection.separated), (3.0, 0.0, False))

    def test_unseparated_jumps_return_max(self):
        selection = omega_from_jumps([1.0, 2.0, 3.0, 4.0])
        self.assertFalse(selection.separated)
        self.assertEqual(selection.omega, 4.0)

    def test_single_jump(self):
        self.assertEqual(omega_from_jumps([7.0]).omega, 7.0)

    def test_single_candidate_returns_its_jump(self):
        data = switching_series(80, [40], seed=2)
        cost = LowRankSparseCost(data)
        expected = abs(cost.objective([]) - cost.objective([40]))
        self.assertAlmostEqual(select_omega(data, [40], cost=cost), expected)


class WindowSizeTests(SimpleTestCase):
    def setUp(self):
        self.data = TimeSeriesData(np.zeros((1000, 1)))

    def _detector(self, counts):
        counts = iter(counts)
        return lambda data, h: next(counts)

    def test_first_repeat(self):
        h = select_window_size(self.data, 0.7, (1, 0.9, 0.8, 0.7), detector=self._detector((3, 2, 2, 2)))
        self.assertEqual(h, math.floor(0.7 * 1000 ** 0.9))

    def test_no_stabilization_returns_last_h(self):
        with self.assertLogs('multi_detect.utils', level='WARNING'):
            h = select_window_size(self.data, 0.7, (1, 0.9, 0.8, 0.7), detector=self._detector((4, 3, 2, 1)))
        self.assertEqual(h, math.floor(0.7 * 1000 ** 0.7))


class RefinementTests(SimpleTestCase):
    def test_interval_formula_single_change(self):
        self.assertEqual(refined_interval([90], 0, 300), (30.0, 160.0))

    def test_exact_detection_is_a_fixed_point(self):
        data = noise_free_piecewise()
        refined = refine_change_points(data, MultiDetection([20], []))
        self.assertEqual(refined.change_points, [20])
        self.assertEqual(refined.extra['pre_refinement'], [20])

    def test_perturbed_detection_moves_back(self):
        closer = 0
        for seed in range(50):
            data = switching_series(120, [60], seed=100 + seed)
            refined = refine_change_points(data, MultiDetection([65], []))
            closer += abs(refined.change_points[0] - 60) <= 5
        self.assertGreaterEqual(closer, 40)

    def test_requires_a_change_point(self):
        with self.assertRaises(InvalidInputError):
            refine_change_points(noise_free_piecewise(), MultiDetection([], []))


class DynamicProgrammingTests(SimpleTestCase):
    def test_infinite_gamma_gives_no_change(self):
        data = switching_series(60, [30], seed=1)
        detection = dp_detect(data, math.inf)
        self.assertEqual(detection.change_points, [])
        self.assertEqual(len(detection.segment_fits), 1)

    def test_recovers_two_changes(self):
        data = switching_series(120, [40, 80], seed=11)
        detection = dp_detect(data, 0.5, step=2)
        self.assertEqual(detection.m_hat, 2)
        for found, truth in zip(detection.change_points, (40, 80)):
            self.assertLessEqual(abs(found - truth), 2)

    def test_negative_gamma_rejected(self):
        with self.assertRaises(InvalidInputError):
            dp_detect(switching_series(60, [], seed=1), -1.0)


class TwoStepTests(SimpleTestCase):
    def test_recovers_single_change(self):
        data = switching_series(200, [100], seed=12)
        detection = two_step_detect(data, 60, 15)
        self.assertEqual(detection.m_hat, 1)
        self.assertLessEqual(abs(detection.change_points[0] - 100), 3)
        self.assertTrue(set(detection.change_points) <= set(detection.candidates.candidates))
        self.assertEqual(detection.window_plan.windows[-1][1], 200)

    def test_large_omega_clears_candidates(self):
        data = switching_series(200, [], seed=13)
        detection = two_step_detect(data, 60, 15, omega_T=1e6)
        self.assertEqual(detection.change_points, [])
