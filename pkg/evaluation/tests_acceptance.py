"""Desk-scale benchmark runs; set LSVAR_ACCEPTANCE=1 to enable them."""
import math
import os
import unittest

import numpy as np
from django.test import SimpleTestCase

from var_model.domain import LowRankSparsePair
from var_model.utils import low_rank_from_basis, random_orthonormal
from .utils import estimation_error_curve, run_replicate, selection_rate, stationary_model

ENABLED = os.getenv('LSVAR_ACCEPTANCE') == '1'
REPLICATES = 20


def replicate_runs(name, method, options=None, replicates=REPLICATES):
    return [run_replicate(name, seed, method, options) for seed in range(replicates)]


@unittest.skipUnless(ENABLED, 'set LSVAR_ACCEPTANCE=1 to run benchmark acceptance runs')
class SingleChangeAcceptanceTests(SimpleTestCase):
    def test_full_and_surrogate_paths_on_a1(self):
        full = replicate_runs('A.1', 'single')
        surrogate = replicate_runs('A.1', 'surrogate-single')
        for runs in (full, surrogate):
            estimates = np.array([run['change_points'][0] / run['T'] for run in runs])
            self.assertTrue(0.49 <= estimates.mean() <= 0.51, estimates.mean())
        full_estimates = np.array([run['change_points'][0] / run['T'] for run in full])
        self.assertLessEqual(full_estimates.std(), 0.01)
        full_time = sum(run['elapsed'] for run in full)
        surrogate_time = sum(run['elapsed'] for run in surrogate)
        self.assertGreaterEqual(full_time / surrogate_time, 3.0)


@unittest.skipUnless(ENABLED, 'set LSVAR_ACCEPTANCE=1 to run benchmark acceptance runs')
class MultipleChangeAcceptanceTests(SimpleTestCase):
    def test_two_step_on_desk_l1(self):
        runs = replicate_runs('L.1-desk', 'two-step')
        exact = sum(len(run['change_points']) == 5 for run in runs)
        self.assertGreaterEqual(exact / len(runs), 0.9)
        rates = selection_rate([run['change_points'] for run in runs], runs[0]['truths'], runs[0]['T'])
        self.assertTrue(all(rate >= 0.9 for rate in rates), rates)

    def test_snr_sweep(self):
        mean_rates = {}
        for name in ('SNR-0.27', 'SNR-0.33', 'SNR-0.53'):
            runs = replicate_runs(name, 'two-step')
            rates = selection_rate([run['change_points'] for run in runs], runs[0]['truths'], runs[0]['T'])
            mean_rates[name] = float(np.mean(rates))
        self.assertGreaterEqual(mean_rates['SNR-0.33'], 0.9)
        self.assertGreaterEqual(mean_rates['SNR-0.53'], 0.9)
        self.assertLess(mean_rates['SNR-0.27'], mean_rates['SNR-0.33'])

    def test_dp_agrees_with_two_step(self):
        agreeing = 0
        for seed in range(10):
            dp = run_replicate('DP.1', seed, 'dp', {'dp_step': 2})
            two_step = run_replicate('DP.1', seed, 'two-step')
            T, truths = dp['T'], dp['truths']
            if len(dp['change_points']) != 2 or len(two_step['change_points']) != 2:
                continue
            tolerance = 0.01 * T
            close = all(
                abs(a - b) <= tolerance and abs(a - truth) <= tolerance
                for a, b, truth in zip(dp['change_points'], two_step['change_points'], truths)
            )
            agreeing += close
        self.assertGreaterEqual(agreeing, 9)


@unittest.skipUnless(ENABLED, 'set LSVAR_ACCEPTANCE=1 to run benchmark acceptance runs')
class EstimationRateAcceptanceTests(SimpleTestCase):
    def test_error_shrinks_from_500_to_4000(self):
        p = 10
        U = random_orthonormal(0, p)
        L = low_rank_from_basis(U, [0.3, 0.1])
        S = np.zeros((p, p))
        S[np.arange(p - 1), np.arange(1, p)] = 0.4
        pair = LowRankSparsePair(L, S, alpha_L=p * float(np.max(np.abs(L))))
        curve = estimation_error_curve(stationary_model(pair), (500, 4000), replicates=10, seed=11)
        self.assertTrue(all(math.isfinite(point['median_error']) for point in curve))
        self.assertLess(curve[1]['median_error'], curve[0]['median_error'])
