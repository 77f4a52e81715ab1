"""Weakly sparse detection path and the combined surrogate/full strategy."""
import logging
import math

import numpy as np

from estimation.domain import PenaltyConfig, SolverOptions
from estimation.utils import interval_tuning, weakly_sparse_fit
from lsvar.exceptions import InvalidInputError
from lsvar.parallel import parallel_map
from multi_detect.costs import LowRankSparseCost, SegmentCost
from multi_detect.domain import MultiDetection
from multi_detect.utils import MIN_WINDOW, plan_windows, two_step_detect
from single_detect.domain import SearchDomain
from single_detect.utils import exhaustive_search
from .domain import Applicability, WeaklySparseConfig

logger = logging.getLogger(__name__)


def lq_norm_q(A, q):
    """Sum of |a_ij|^q."""
    if not 0 < q <= 1:
        raise InvalidInputError(f"q must lie in (0, 1], got {q}")
    values = np.abs(np.asarray(A, dtype=float))
    return float(np.sum(values[values > 0] ** q))


def radius_lower_bound(pairs, q, M_S, alpha_L=None):
    """Smallest l_q radius that contains every transition built from `pairs`.

    d_max*((alpha_L/p)^q + M_S^q) + (p^2 - d_max)*sigma_max^q, with d_max the
    largest sparse support and sigma_max the largest low-rank spectral norm.
    """
    if not 0 < q < 1:
        raise InvalidInputError(f"q must lie in (0, 1), got {q}")
    pairs = list(pairs)
    if not pairs:
        raise InvalidInputError("radius_lower_bound needs at least one segment")
    p = pairs[0].p
    if alpha_L is None:
        alpha_L = max(pair.alpha_L for pair in pairs)
    d_max = max(int(np.count_nonzero(pair.S)) for pair in pairs)
    sigma_max = max(float(np.linalg.norm(pair.L, 2)) for pair in pairs)
    sparse_term = 0.0 if d_max == 0 else d_max * ((alpha_L / p) ** q + M_S ** q)
    return float(sparse_term + (p * p - d_max) * sigma_max ** q)


def threshold_support(A_hat, eta):
    """Zero-based (row, column) indices with |a| > eta."""
    if not eta > 0:
        raise InvalidInputError(f"eta must be positive, got {eta}")
    rows, cols = np.nonzero(np.abs(np.asarray(A_hat, dtype=float)) > eta)
    return {(int(row), int(col)) for row, col in zip(rows, cols)}


def surrogate_weight(n, p, c):
    return interval_tuning(n, p, c, c)[0]


def default_surrogate_domain(T, p, R_q, q):
    """[a, T - a] with a = floor(R_q * (log(max(p, T)) / T)^(-q/2))."""
    if T < 10:
        raise InvalidInputError(f"Series of length {T} is too short for a search domain (need T >= 10)")
    width = math.floor(R_q * (math.log(max(p, T)) / T) ** (-q / 2))
    lower, upper = width, T - width
    if lower < 1 or lower >= upper:
        lower, upper = math.ceil(0.1 * T), math.floor(0.9 * T)
        logger.debug(f"Surrogate search domain fell back to [{lower}, {upper}]")
    return SearchDomain(lower, upper)


def weakly_sparse_pair_fitter(config, opts=None):
    def fit_pair(data, tau):
        lambda1 = surrogate_weight(tau - 1, data.p, config.c0_w)
        lambda2 = surrogate_weight(data.T - tau, data.p, config.c0_w)
        left = weakly_sparse_fit(data, (0, tau), lambda1, opts)
        right = weakly_sparse_fit(data, (tau - 1, data.T), lambda2, opts)
        return left, right
    return fit_pair


def surrogate_detect_single(data, domain=None, config=None, opts=None):
    config = config or WeaklySparseConfig()
    if domain is None:
        domain = default_surrogate_domain(data.T, data.p, config.R_q, config.q)
    return exhaustive_search(data, domain, fit_pair=weakly_sparse_pair_fitter(config, opts or SolverOptions()),
                             method='surrogate')


class WeaklySparseCost(SegmentCost):
    """Lasso segment fits; cost is residual sum plus lambda*|A|_1."""

    label = 'weakly_sparse'

    def __init__(self, data, config=None, opts=None):
        super().__init__(data, opts)
        self.config = config or WeaklySparseConfig()

    def _fit(self, start, stop):
        lambda_w = self.config.lambda_w or surrogate_weight(stop - start, self.data.p, self.config.c0_w)
        return weakly_sparse_fit(self.data, (start - 1, stop), lambda_w, self.opts)


def applicability(config, model=None, fits=None):
    """Radius check against a known model, or a plug-in check on fitted transitions."""
    if model is not None:
        bound = radius_lower_bound(model.segments, config.q, model.max_sparse_magnitude, model.alpha_L)
        result = Applicability(config.q, config.R_q, bound, 'model')
    else:
        bound = max(lq_norm_q(fit.transition, config.q) for fit in fits)
        result = Applicability(config.q, config.R_q, bound, 'estimate')
    if not result.applicable:
        logger.warning(f"R_q={config.R_q} is below the required radius {bound:.4g}; surrogate path not applicable")
    return result


def _support_sizes(config, fits):
    sizes = []
    for fit in fits:
        eta = config.eta_for(fit.lambda_)
        if eta > 0:
            sizes.append(len(threshold_support(fit.transition, eta)))
        else:
            sizes.append(int(np.count_nonzero(fit.transition)))
    return sizes


def surrogate_detect_multi(data, plan, config=None, opts=None, omega_T=None, model=None):
    """Rolling windows with lasso fits, screened with the weakly sparse IC."""
    config = config or WeaklySparseConfig()
    opts = opts or SolverOptions()

    def search(window_data, domain):
        return surrogate_detect_single(window_data, domain, config, opts)

    detection = two_step_detect(data, plan.h, plan.l, opts=opts, omega_T=omega_T,
                                cost=WeaklySparseCost(data, config, opts), search=search,
                                method='surrogate', plan=plan)
    detection.extra['thresholded_support'] = _support_sizes(config, detection.segment_fits)
    detection.extra['applicability'] = applicability(config, model, detection.segment_fits).to_dict()
    return detection


def merge_within(primary, secondary, radius):
    """Sorted union keeping every primary point; secondary points closer than `radius` to a kept point drop."""
    merged = sorted(primary)
    for point in sorted(secondary):
        if all(abs(point - kept) >= radius for kept in merged):
            merged.append(point)
            merged.sort()
    return merged


def combined_strategy(data, h, l=None, config=None, penalty=None, opts=None, omega_T=None, full_omega_T=None,
                      model=None):
    """Surrogate screening first, then the full model inside each surrogate segment."""
    config = config or WeaklySparseConfig()
    penalty = penalty or PenaltyConfig()
    opts = opts or SolverOptions()
    l = l if l is not None else max(1, h // 4)
    surrogate = surrogate_detect_multi(data, plan_windows(data.T, h, l), config, opts, omega_T, model)

    bounds = [1] + surrogate.change_points + [data.T]
    segments = [(start, stop) for start, stop in zip(bounds, bounds[1:]) if stop - start + 1 >= MIN_WINDOW]

    def full_pass(segment):
        start, stop = segment
        piece = data.window(start - 1, stop)
        h_seg = min(h, piece.T)
        found = two_step_detect(piece, h_seg, min(l, max(1, h_seg // 4)), penalty, opts, full_omega_T)
        return [tau + start - 1 for tau in found.change_points]

    full_points = [tau for points in parallel_map(full_pass, segments) for tau in points]
    change_points = merge_within(surrogate.change_points, full_points, l)
    logger.info(f"Combined strategy: surrogate {surrogate.change_points}, full model added "
                f"{sorted(set(change_points) - set(surrogate.change_points))}")

    cost = LowRankSparseCost(data, penalty, opts)
    fits = [cost.final_fit(start, stop) for start, stop in zip([1] + change_points, change_points + [data.T])]
    return MultiDetection(
        change_points, fits, surrogate.trace, 'combined', surrogate.window_plan, surrogate.candidates,
        {
            'surrogate_change_points': list(surrogate.change_points),
            'full_model_change_points': sorted(full_points),
            'applicability': surrogate.extra['applicability'],
        },
    )
