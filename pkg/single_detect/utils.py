"""Exhaustive search for a single change point."""
import logging
import math

import pandas as pd

from estimation.domain import FitResult, SolverOptions
from estimation.utils import (
    fit_lowrank_sparse,
    ols_transition,
    residual_sum,
    search_phase_tuning,
    segment_phase_tuning,
)
from lsvar.exceptions import DegenerateIntervalError, DetectionError, InvalidInputError, LsvarError
from lsvar.parallel import parallel_map
from lsvar.storage import write_frame
from .domain import SearchDomain, SingleDetection

logger = logging.getLogger(__name__)

# Relative range below which an objective curve counts as flat.
FLAT_CURVE_RATIO = 0.05


def _transition(fit):
    return getattr(fit, 'transition', fit)


def fit_response_range(data, start, stop, penalty, opts=None):
    """Fit on the responses start..stop-1 (observations start-1..stop-1)."""
    return fit_lowrank_sparse(data, (start - 1, stop), penalty, opts)


def split_objective(data, tau, left, right):
    if not 1 < tau < data.T:
        raise InvalidInputError(f"tau={tau} must satisfy 1 < tau < T={data.T}")
    total = (residual_sum(data, (0, tau), _transition(left))
             + residual_sum(data, (tau - 1, data.T), _transition(right)))
    return total / (data.T - 1)


def default_search_domain(T, d_max, r_max, eta):
    if T < 10:
        raise InvalidInputError(f"Series of length {T} is too short for a search domain (need T >= 10)")
    width = (d_max + math.sqrt(r_max)) ** (1 + eta)
    lower = math.floor(width)
    upper = math.floor(T - width)
    if lower < 1 or lower >= upper:
        lower, upper = math.ceil(0.1 * T), math.floor(0.9 * T)
        logger.debug(f"Search domain fell back to [{lower}, {upper}]")
    return SearchDomain(lower, upper)


def lowrank_sparse_pair_fitter(penalty, opts=None):
    """Left/right fits with search-phase tuning at tau."""
    def fit_pair(data, tau):
        lambda1, mu1, lambda2, mu2 = search_phase_tuning(tau, data.T, data.p, penalty)
        left = fit_lowrank_sparse(data, (0, tau), penalty.with_weights(lambda1, mu1), opts)
        right = fit_lowrank_sparse(data, (tau - 1, data.T), penalty.with_weights(lambda2, mu2), opts)
        return left, right
    return fit_pair


def _ols_fit(data, interval):
    A = ols_transition(data, interval)
    zeros = A * 0.0
    rss = residual_sum(data, interval, A)
    return FitResult(zeros, A, rss / (interval[1] - interval[0] - 1), 0, True, rss, interval[1] - interval[0] - 1)


def ols_pair_fitter(data, tau):
    """Unpenalized left/right least-squares fits."""
    return _ols_fit(data, (0, tau)), _ols_fit(data, (tau - 1, data.T))


def exhaustive_search(data, domain, penalty=None, opts=None, fit_pair=None, method='lowrank_sparse'):
    """Evaluate the split objective at every tau of `domain`; ties go to the smallest tau."""
    domain.check_fits(data.T)
    if fit_pair is None:
        fit_pair = lowrank_sparse_pair_fitter(penalty, opts or SolverOptions())

    admissible = [tau for tau in domain.taus() if 3 <= tau <= data.T - 2]
    skipped = [tau for tau in domain.taus() if tau not in admissible]
    for tau in skipped:
        logger.warning(f"tau={tau} leaves fewer than 2 transition pairs on one side; skipped")

    def evaluate(tau):
        try:
            left, right = fit_pair(data, tau)
        except LsvarError as exc:
            logger.warning(f"Fit failed at tau={tau}: {exc}")
            return tau, None
        return tau, (split_objective(data, tau, left, right), left, right)

    curve = []
    best = None
    for tau, outcome in parallel_map(evaluate, admissible):
        if outcome is None:
            skipped.append(tau)
            continue
        value, left, right = outcome
        curve.append((tau, value))
        if best is None or value < best[1]:
            best = (tau, value, left, right)

    if best is None:
        raise DetectionError(f"Every tau in [{domain.lower}, {domain.upper}] failed")
    logger.debug(f"Exhaustive search picked tau={best[0]} from {len(curve)} evaluations")
    return SingleDetection(best[0], curve, best[2], best[3], sorted(skipped), method)


def remove_radius_neighborhood(tau_hat, R, T):
    """Response ranges [1, tau_hat - R) and [tau_hat + R, T)."""
    if R < 0:
        raise InvalidInputError(f"Radius must be nonnegative, got {R}")
    left = (1, tau_hat - R)
    right = (tau_hat + R, T)
    if left[1] - left[0] < 2 or right[1] - right[0] < 2:
        raise DegenerateIntervalError(
            f"Removing radius {R} around tau={tau_hat} leaves fewer than 2 points on one side of [1, {T})"
        )
    return left, right


def refit_after_detection(data, tau_hat, R, penalty, opts=None):
    """Refit both stationary sides with segment-phase tuning after dropping the R-neighbourhood."""
    fits = []
    for start, stop in remove_radius_neighborhood(tau_hat, R, data.T):
        lambda_j, mu_j = segment_phase_tuning(stop - start, data.p, penalty.alpha_L, penalty)
        fits.append(fit_response_range(data, start, stop, penalty.with_weights(lambda_j, mu_j), opts))
    return tuple(fits)


def is_flat_curve(curve, ratio=FLAT_CURVE_RATIO):
    values = [value for _, value in curve]
    top = max(values)
    return top == 0 or (top - min(values)) / top < ratio


def curve_frame(curve):
    return pd.DataFrame(curve, columns=['tau', 'objective'])


def write_curve_tsv(path, curve):
    return write_frame(path, curve_frame(curve), sep='\t')
