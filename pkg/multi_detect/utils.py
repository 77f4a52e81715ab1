"""Rolling-window screening, backward elimination, refinement and dynamic programming."""
import logging
import math
from dataclasses import dataclass

import numpy as np

from estimation.domain import PenaltyConfig, SolverOptions
from lsvar.exceptions import DegenerateIntervalError, InvalidInputError, LsvarError
from lsvar.parallel import parallel_map
from single_detect.domain import SearchDomain
from single_detect.utils import exhaustive_search, ols_pair_fitter, write_curve_tsv
from .costs import FixedWeightsCost, LowRankSparseCost
from .domain import Candidate, CandidateSet, MultiDetection, ScreeningTrace, WindowPlan

logger = logging.getLogger(__name__)

# Between-cluster share of jump variance above which the two clusters count as separated.
SEPARATION_RATIO = 0.85
MIN_WINDOW = 6


def plan_windows(T, h, l):
    """Response windows [1 + k*l, h + k*l) plus a final window right-aligned at T."""
    if not 2 <= h <= T:
        raise InvalidInputError(f"Window length h={h} must satisfy 2 <= h <= T={T}")
    if not 1 <= l <= max(h / 2, 1):
        raise InvalidInputError(f"Shift l={l} must satisfy 1 <= l <= max(h/2, 1) for h={h}")
    windows = []
    start = 1
    while start + h - 1 < T:
        windows.append((start, start + h - 1))
        start += l
    final = (max(1, T - h + 1), T)
    if final not in windows:
        windows.append(final)
    return WindowPlan(h, l, windows)


def window_margin(h):
    return max(2, h // 20)


def _default_search(penalty, opts):
    def search(window_data, domain):
        return exhaustive_search(window_data, domain, penalty, opts)
    return search


def merge_candidates(entries, radius):
    """Collapse candidates closer than `radius`, keeping the lower window objective."""
    merged = []
    for entry in sorted(entries, key=lambda item: (item.tau, item.objective)):
        if merged and entry.tau - merged[-1].tau < radius:
            if entry.objective < merged[-1].objective:
                merged[-1] = entry
            continue
        merged.append(entry)
    # Equal taus from two windows collapse above; keep strictly increasing output.
    unique = []
    for entry in merged:
        if not unique or entry.tau > unique[-1].tau:
            unique.append(entry)
    return unique


def rolling_window_candidates(data, plan, penalty=None, opts=None, search=None):
    """One exhaustive-search candidate per window, merged within the shift l."""
    if plan.h < MIN_WINDOW:
        raise InvalidInputError(f"Rolling windows need h >= {MIN_WINDOW}, got {plan.h}")
    if search is None:
        search = _default_search(penalty or PenaltyConfig(), opts or SolverOptions())
    margin = window_margin(plan.h)

    def run(window):
        b, e = window
        window_data = data.window(b - 1, e)
        T_w = window_data.T
        lower, upper = max(3, margin + 1), min(T_w - 2, T_w - margin)
        try:
            detection = search(window_data, SearchDomain(lower, upper))
        except LsvarError as exc:
            logger.warning(f"Window [{b}, {e}) skipped: {exc}")
            return window, None
        return window, detection

    entries = []
    curves = {}
    for window, detection in parallel_map(run, plan.windows):
        if detection is None:
            continue
        offset = window[0] - 1
        curves[window] = [(tau + offset, value) for tau, value in detection.objective_curve]
        entries.append(Candidate(detection.tau_hat + offset, window, detection.minimum))

    merged = merge_candidates(entries, plan.l)
    logger.info(f"{len(plan.windows)} windows produced {len(entries)} candidates, {len(merged)} after merging")
    return CandidateSet(merged, curves)


def _bounds(breakpoints, T):
    points = sorted(int(point) for point in breakpoints)
    if points and (points[0] <= 1 or points[-1] >= T):
        raise InvalidInputError(f"Breakpoints {points} must lie strictly inside (1, {T})")
    if len(set(points)) != len(points):
        raise InvalidInputError(f"Breakpoints {points} contain duplicates")
    bounds = [1] + points + [T]
    for start, stop in zip(bounds, bounds[1:]):
        if stop - start < 2:
            raise DegenerateIntervalError(f"Segment [{start}, {stop}) has fewer than 2 transition pairs")
    return bounds


def information_criterion(data, breakpoints, penalties=None, omega_T=0.0, opts=None, penalty=None, cost=None):
    """Sum of penalized segment costs plus m * omega_T.

    Without explicit per-segment `penalties`, each segment is tuned with
    4c0*sqrt((log p + log n)/n) and 4c0'*sqrt((p + log n)/n) on its own length n.
    """
    if omega_T < 0:
        raise InvalidInputError(f"omega_T must be nonnegative, got {omega_T}")
    bounds = _bounds(breakpoints, data.T)
    if cost is None:
        if penalties is not None:
            if len(penalties) != len(bounds) - 1:
                raise InvalidInputError(f"Expected {len(bounds) - 1} segment penalties, got {len(penalties)}")
            cost = FixedWeightsCost(data, penalties, bounds, penalty, opts)
        else:
            cost = LowRankSparseCost(data, penalty, opts)
    return cost.objective(bounds[1:-1]) + (len(bounds) - 2) * omega_T


def _best_removal(cost, current):
    """(objective without candidate j, j) minimizing the objective; smallest j on ties."""
    values = parallel_map(lambda j: cost.objective(current[:j] + current[j + 1:]), range(len(current)))
    best = min(range(len(values)), key=lambda j: (values[j], j))
    return values[best], best


def _segment_fits(cost, change_points):
    bounds = [1] + list(change_points) + [cost.data.T]
    return parallel_map(lambda segment: cost.final_fit(*segment), list(zip(bounds, bounds[1:])))


def backward_elimination(data, candidates, omega_T, opts=None, penalty=None, cost=None, method='two-step'):
    """Drop the candidate whose removal lowers the IC most while the IC does not increase."""
    points = candidates.candidates if isinstance(candidates, CandidateSet) else sorted(candidates)
    if not points:
        raise InvalidInputError("Backward elimination needs at least one candidate")
    if omega_T < 0:
        raise InvalidInputError(f"omega_T must be nonnegative, got {omega_T}")
    cost = cost or LowRankSparseCost(data, penalty, opts)
    _bounds(points, data.T)

    current = list(points)
    W = cost.objective(current) + len(current) * omega_T
    trace = ScreeningTrace([(tuple(current), W)], omega_T, [])
    while current:
        objective, j = _best_removal(cost, current)
        W_next = objective + (len(current) - 1) * omega_T
        if W_next > W:
            break
        trace.removed.append(current.pop(j))
        W = W_next
        trace.ic_values.append((tuple(current), W))

    logger.info(f"Screening kept {len(current)} of {len(points)} candidates at omega_T={omega_T:.6g}")
    return MultiDetection(current, _segment_fits(cost, current), trace, method,
                          candidates=candidates if isinstance(candidates, CandidateSet) else None)


@dataclass
class OmegaSelection:
    omega: float
    jumps: list
    ratio: float
    separated: bool

    @property
    def screening_omega(self):
        """Just below the smallest large jump when clusters separate, so that jump survives."""
        return float(np.nextafter(self.omega, 0.0)) if self.separated else self.omega


def elimination_jumps(cost, points):
    """Objective jumps |L_T after k-th deletion - before| along the greedy path to the empty set."""
    current = list(points)
    before = cost.objective(current)
    jumps = []
    while current:
        after, j = _best_removal(cost, current)
        current.pop(j)
        jumps.append(abs(after - before))
        before = after
    return jumps


def omega_from_jumps(jumps):
    """Two-means split of the jump values; see OmegaSelection for the outcome."""
    values = np.sort(np.asarray(jumps, dtype=float))
    if values.size == 0:
        raise InvalidInputError("No jumps to cluster")
    if values.size == 1:
        return OmegaSelection(float(values[0]), list(jumps), 1.0, True)
    total = float(np.sum((values - values.mean()) ** 2))
    if total == 0:
        return OmegaSelection(float(values[-1]), list(jumps), 0.0, False)
    best_within, split = math.inf, 1
    for i in range(1, values.size):
        low, high = values[:i], values[i:]
        within = float(np.sum((low - low.mean()) ** 2) + np.sum((high - high.mean()) ** 2))
        if within < best_within:
            best_within, split = within, i
    ratio = 1.0 - best_within / total
    if ratio >= SEPARATION_RATIO:
        return OmegaSelection(float(values[split]), list(jumps), ratio, True)
    return OmegaSelection(float(values[-1]), list(jumps), ratio, False)


def omega_selection(data, candidates, opts=None, penalty=None, cost=None):
    points = candidates.candidates if isinstance(candidates, CandidateSet) else sorted(candidates)
    if not points:
        raise InvalidInputError("omega selection needs at least one candidate")
    cost = cost or LowRankSparseCost(data, penalty, opts)
    selection = omega_from_jumps(elimination_jumps(cost, points))
    logger.info(
        f"omega_T={selection.omega:.6g} from {len(selection.jumps)} jumps "
        f"(between/total {selection.ratio:.3f})"
    )
    return selection


def select_omega(data, candidates, opts=None, penalty=None, cost=None):
    return omega_selection(data, candidates, opts, penalty, cost).omega


def two_step_detect(data, h, l=None, penalty=None, opts=None, omega_T=None, refine=False, cost=None, search=None,
                    method='two-step', plan=None):
    """Rolling-window candidates followed by IC screening."""
    penalty = penalty or PenaltyConfig()
    opts = opts or SolverOptions()
    if plan is None:
        plan = plan_windows(data.T, h, l if l is not None else max(1, h // 4))
    candidates = rolling_window_candidates(data, plan, penalty, opts, search)
    cost = cost or LowRankSparseCost(data, penalty, opts)
    if not len(candidates):
        logger.warning("No window produced a candidate")
        detection = MultiDetection([], _segment_fits(cost, []), ScreeningTrace(omega_T=omega_T or 0.0), method)
    else:
        if omega_T is None:
            omega_T = omega_selection(data, candidates, cost=cost).screening_omega
        detection = backward_elimination(data, candidates, omega_T, cost=cost, method=method)
        if refine and detection.m_hat:
            detection = refine_change_points(data, detection, opts, cost=cost)
    detection.window_plan = plan
    detection.candidates = candidates
    return detection


def select_window_size(data, c, delta_schedule, penalty=None, opts=None, detector=None):
    """First h = c*T^delta whose change point count repeats the previous one."""
    if not delta_schedule:
        raise InvalidInputError("delta_schedule is empty")
    if detector is None:
        def detector(series, h):
            return two_step_detect(series, h, max(1, h // 4), penalty, opts).m_hat
    previous = None
    h = None
    for delta in delta_schedule:
        h = min(data.T, max(MIN_WINDOW, int(math.floor(c * data.T ** delta))))
        count = detector(data, h)
        logger.info(f"delta={delta}: h={h} gives {count} change points")
        if previous is not None and count == previous[1]:
            return previous[0]
        previous = (h, count)
    logger.warning(f"Change point count never stabilized; using last h={h}")
    return h


def refined_interval(taus, j, T):
    """Open interval (2*tau_{j-1}/3 + tau_j/3, 2*tau_j/3 + tau_{j+1}/3)."""
    bounds = [0] + list(taus) + [T]
    return (2 * bounds[j] / 3 + bounds[j + 1] / 3, 2 * bounds[j + 1] / 3 + bounds[j + 2] / 3)


def _refine_one(data, taus, j):
    lo, hi = refined_interval(taus, j, data.T)
    start, stop = math.floor(lo) + 1, math.ceil(hi) - 1
    window = data.window(start - 1, stop + 1)
    # Both sides need more than p pairs for least squares to be identified.
    lower, upper = max(3, data.p + 2), min(window.T - 2, window.T - data.p - 1)
    if lower >= upper:
        logger.debug(f"Refined interval ({lo:.1f}, {hi:.1f}) too short; keeping tau={taus[j]}")
        return taus[j]
    try:
        detection = exhaustive_search(window, SearchDomain(lower, upper), fit_pair=ols_pair_fitter,
                                      method='ols')
    except LsvarError as exc:
        logger.warning(f"Refinement around tau={taus[j]} failed: {exc}")
        return taus[j]
    return detection.tau_hat + start - 1


def refine_change_points(data, detection, opts=None, penalty=None, cost=None):
    """Least-squares re-search of each change point within its refined interval."""
    if not detection.m_hat:
        raise InvalidInputError("Refinement needs at least one change point")
    taus = list(detection.change_points)
    refined = parallel_map(lambda j: _refine_one(data, taus, j), range(len(taus)))
    refined = sorted(set(refined))
    logger.info(f"Refined {taus} to {refined}")
    cost = cost or LowRankSparseCost(data, penalty, opts)
    return MultiDetection(refined, _segment_fits(cost, refined), detection.trace, detection.method,
                          detection.window_plan, detection.candidates,
                          dict(detection.extra, pre_refinement=taus))


def dp_detect(data, gamma, penalty=None, opts=None, min_pairs=None, step=1, cost=None):
    """Optimal partitioning of [1, T) with per-segment residual sums plus gamma per segment."""
    if gamma < 0:
        raise InvalidInputError(f"gamma must be nonnegative, got {gamma}")
    cost = cost or LowRankSparseCost(data, penalty, opts)
    T = data.T
    min_pairs = max(2, min_pairs if min_pairs is not None else 2 * data.p)
    if math.isinf(gamma) or T - 1 < 2 * min_pairs:
        return MultiDetection([], _segment_fits(cost, []), ScreeningTrace(omega_T=gamma), 'dp')

    grid = sorted(set(range(1, T, step)) | {T})
    F = {1: -gamma}
    previous = {}
    for t in grid[1:]:
        starts = [s for s in F if t - s >= min_pairs]
        if not starts:
            continue
        values = parallel_map(lambda s: F[s] + cost.residual(s, t) + gamma, starts)
        best = min(range(len(starts)), key=lambda i: (values[i], starts[i]))
        F[t] = values[best]
        previous[t] = starts[best]

    change_points = []
    t = previous[T]
    while t != 1:
        change_points.append(t)
        t = previous[t]
    change_points.reverse()
    logger.info(f"Dynamic programming with gamma={gamma:.6g} found {change_points}")
    return MultiDetection(change_points, _segment_fits(cost, change_points),
                          ScreeningTrace([(tuple(change_points), F[T])], gamma), 'dp')


def default_dp_gamma(data, h, l=None, penalty=None, opts=None, cost=None):
    """Penalty for dynamic programming taken from the screening omega on rolling-window candidates."""
    plan = plan_windows(data.T, h, l if l is not None else max(1, h // 4))
    candidates = rolling_window_candidates(data, plan, penalty, opts)
    if not len(candidates):
        return math.inf
    return select_omega(data, candidates, opts, penalty, cost)


def write_window_curves(directory, candidates):
    """curve_window_<i>.tsv per window, numbered in window order."""
    paths = []
    for i, window in enumerate(sorted(candidates.curves), start=1):
        paths.append(write_curve_tsv(directory / f'curve_window_{i}.tsv', candidates.curves[window]))
    return paths
