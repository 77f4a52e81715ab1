"""Accuracy metrics, replicate runs and benchmark aggregation."""
import logging
import math
import time

import numpy as np
import pandas as pd
from django.conf import settings

from estimation.domain import PenaltyConfig, SolverOptions
from estimation.utils import estimate_rank, fit_lowrank_sparse, penalty_for_data, segment_phase_tuning
from lsvar.exceptions import InvalidInputError, UndefinedMetricError
from lsvar.parallel import parallel_map
from multi_detect.utils import dp_detect, plan_windows, rolling_window_candidates, select_omega, two_step_detect
from single_detect.utils import default_search_domain, exhaustive_search, refit_after_detection
from surrogate.domain import DEFAULT_Q, WeaklySparseConfig
from surrogate.utils import combined_strategy, surrogate_detect_multi, surrogate_detect_single
from var_model.domain import PiecewiseVarModel
from var_model.utils import simulate_piecewise_var
from .domain import MetricsReport
from .scenarios import generate_scenario

logger = logging.getLogger(__name__)

# Default rolling window h = WINDOW_C * T^WINDOW_DELTA for benchmark runs.
WINDOW_C = 0.7
WINDOW_DELTA = 0.8


def hausdorff_directed(A, B):
    """max over b in B of the distance to the nearest point of A."""
    A, B = sorted(set(A)), sorted(set(B))
    if not B:
        return 0.0
    if not A:
        return math.inf
    return float(max(min(abs(b - a) for a in A) for b in B))


def support(matrix, threshold=None):
    if threshold is None:
        threshold = settings.LSVAR_SUPPORT_THRESHOLD
    return np.abs(np.asarray(matrix, dtype=float)) > threshold


def sensitivity_specificity(S_hat, S_star, support_threshold=None):
    """SEN = TP/(TP+FN) and SPC = TN/(FN+TN) on thresholded supports."""
    S_hat, S_star = np.asarray(S_hat, dtype=float), np.asarray(S_star, dtype=float)
    if S_hat.shape != S_star.shape:
        raise InvalidInputError(f"Shapes differ: {S_hat.shape} vs {S_star.shape}")
    estimated, truth = support(S_hat, support_threshold), support(S_star, support_threshold)
    tp = int(np.sum(estimated & truth))
    fn = int(np.sum(~estimated & truth))
    tn = int(np.sum(~estimated & ~truth))
    if tp + fn == 0:
        raise UndefinedMetricError("Sensitivity is undefined for an empty true support")
    if fn + tn == 0:
        raise UndefinedMetricError("Specificity is undefined without estimated zeros")
    return tp / (tp + fn), tn / (fn + tn)


def relative_error(estimate, truth):
    truth = np.asarray(truth, dtype=float)
    scale = np.linalg.norm(truth)
    if scale == 0:
        raise UndefinedMetricError("Relative error is undefined for a zero truth")
    return float(np.linalg.norm(np.asarray(estimate, dtype=float) - truth) / scale)


def success_band(truths, j, T, scale=1.0):
    """[tau_j - (tau_j - tau_{j-1})/10, tau_j + (tau_{j+1} - tau_j)/10] with tau_0 = 0 and tau_{m+1} = T."""
    bounds = [0] + list(truths) + [T]
    tau = bounds[j + 1]
    return tau - scale * (tau - bounds[j]) / 10, tau + scale * (bounds[j + 2] - tau) / 10


def point_successes(detected, truths, T, scale=1.0):
    successes = []
    for j in range(len(truths)):
        lo, hi = success_band(truths, j, T, scale)
        successes.append(any(lo <= tau <= hi for tau in detected))
    return successes


def selection_rate(detections, truths, T, scale=1.0):
    """Per true point, the fraction of replicates with a detection inside its band."""
    truths = list(truths)
    if truths != sorted(truths):
        raise InvalidInputError(f"True change points must be sorted, got {truths}")
    if not detections:
        return [0.0] * len(truths)
    hits = np.array([point_successes(detected, truths, T, scale) for detected in detections], dtype=float)
    return hits.mean(axis=0).tolist()


def snr(model, T):
    """Minimum spacing times minimum jump over T."""
    if model.m0 == 0:
        raise UndefinedMetricError("SNR is undefined without change points")
    bounds = [0] + list(model.change_points) + [T]
    spacing = min(b - a for a, b in zip(bounds, bounds[1:]))
    return spacing * min(model.jump_sizes('transition')) / T


def nearest_points(detected, truths):
    return [min(detected, key=lambda tau: (abs(tau - truth), tau)) if detected else None for truth in truths]


def _mean_or_none(values):
    values = [value for value in values if value is not None]
    return float(np.mean(values)) if values else None


def segment_metrics(fits, model, support_threshold=None):
    """Support recovery and relative errors averaged over aligned segments."""
    if len(fits) != len(model.segments):
        return {}
    sen, spc, errors = [], [], []
    for fit, segment in zip(fits, model.segments):
        try:
            pair = sensitivity_specificity(fit.S_hat, segment.S, support_threshold)
        except UndefinedMetricError:
            pair = (None, None)
        sen.append(pair[0])
        spc.append(pair[1])
        parts = []
        for estimate, truth in ((fit.transition, segment.transition), (fit.S_hat, segment.S), (fit.L_hat, segment.L)):
            try:
                parts.append(relative_error(estimate, truth))
            except UndefinedMetricError:
                parts.append(None)
        errors.append(parts)
    return {
        'sensitivity': _mean_or_none(sen),
        'specificity': _mean_or_none(spc),
        'relative_errors': tuple(_mean_or_none([row[k] for row in errors]) for k in range(3)),
        'rank_estimates': [estimate_rank(fit.L_hat) for fit in fits],
    }


def evaluate_detection(change_points, model, T, fits=None, support_threshold=None):
    """MetricsReport of one detection against the generating model."""
    truths = list(model.change_points)
    detected = list(change_points)
    report = MetricsReport(extra={'m_hat': len(detected), 'm0': len(truths)})
    if truths:
        report.hausdorff = hausdorff_directed(detected, truths)
        report.selection_rate = float(np.mean(point_successes(detected, truths, T)))
        report.snr = snr(model, T)
    if fits is not None:
        metrics = segment_metrics(fits, model, support_threshold)
        report.sensitivity = metrics.get('sensitivity')
        report.specificity = metrics.get('specificity')
        errors = metrics.get('relative_errors')
        if errors is not None and all(value is not None for value in errors):
            report.relative_errors = errors
        if 'rank_estimates' in metrics:
            report.extra['rank_estimates'] = metrics['rank_estimates']
    return report


def default_window(T):
    return min(T, max(6, int(math.floor(WINDOW_C * T ** WINDOW_DELTA))))


def detect_replicate(model, data, method='two-step', options=None):
    """Run one detector on one realisation; returns (change_points, segment fits)."""
    options = dict(options or {})
    opts = SolverOptions()
    penalty = penalty_for_data(data, options.get('alpha_c'))
    T = data.T
    h = int(options.get('h') or default_window(T))
    l = int(options.get('l') or max(1, h // 4))
    omega = options.get('omega')
    surrogate_config = WeaklySparseConfig(q=float(options.get('q') or DEFAULT_Q))

    if method in ('single', 'surrogate-single'):
        d_max = max(int(np.max(np.sum(np.abs(segment.S) > 0, axis=1))) for segment in model.segments)
        r_max = max(int(np.linalg.matrix_rank(segment.L)) for segment in model.segments)
        domain = default_search_domain(T, d_max, r_max, 0.1)
        if method == 'single':
            detection = exhaustive_search(data, domain, penalty, opts)
        else:
            detection = surrogate_detect_single(data, domain, surrogate_config, opts)
        fits = refit_after_detection(data, detection.tau_hat, 0, penalty, opts)
        return [detection.tau_hat], list(fits)
    if method == 'two-step':
        detection = two_step_detect(data, h, l, penalty, opts, omega, refine=bool(options.get('refine')))
    elif method == 'dp':
        gamma = options.get('gamma')
        if gamma is None:
            candidates = rolling_window_candidates(data, plan_windows(T, h, l), penalty, opts)
            gamma = select_omega(data, candidates, opts, penalty) if len(candidates) else math.inf
        detection = dp_detect(data, gamma, penalty, opts, step=int(options.get('dp_step', 1)))
    elif method == 'surrogate':
        detection = surrogate_detect_multi(data, plan_windows(T, h, l), surrogate_config, opts, omega)
    elif method == 'combined':
        detection = combined_strategy(data, h, l, surrogate_config, penalty, opts, omega)
    else:
        raise InvalidInputError(f"Unknown method {method!r}")
    return list(detection.change_points), list(detection.segment_fits)


def realised_parameters(model, snr_value=None):
    """Jump sizes and SNR the generated model actually has, with its basis seed and contraction."""
    metadata = model.metadata or {}
    return {
        'v_L': metadata.get('jump_lowrank', model.jump_sizes('lowrank')),
        'v_S': metadata.get('jump_sparse', model.jump_sizes('sparse')),
        'snr': snr_value,
        'contraction': metadata.get('contraction', 1.0),
        'basis_seed': metadata.get('basis_seed'),
    }


def run_replicate(name, seed, method='two-step', options=None):
    """Generate, detect and score one replicate of a catalog scenario."""
    model, data = generate_scenario(name, seed)
    started = time.perf_counter()
    change_points, fits = detect_replicate(model, data, method, options)
    elapsed = time.perf_counter() - started
    report = evaluate_detection(change_points, model, data.T, fits)
    realised = realised_parameters(model, report.snr)
    logger.info(f"{name} seed={seed} {method}: {change_points} in {elapsed:.2f}s")
    return {
        'scenario': name,
        'seed': seed,
        'method': method,
        'T': data.T,
        'truths': list(model.change_points),
        'change_points': change_points,
        'elapsed': elapsed,
        'metrics': report.to_dict(),
        'realised': realised,
    }


def benchmark_frame(results):
    """One row per (replicate, true point): replicate, point_index, truth_rel, est_rel, success."""
    rows = []
    for replicate, result in enumerate(results):
        T, truths, detected = result['T'], result['truths'], result['change_points']
        successes = point_successes(detected, truths, T)
        for j, (truth, nearest) in enumerate(zip(truths, nearest_points(detected, truths))):
            rows.append({
                'replicate': replicate,
                'point_index': j,
                'truth_rel': truth / T,
                'est_rel': nearest / T if nearest is not None else np.nan,
                'success': bool(successes[j]),
            })
    return pd.DataFrame(rows, columns=['replicate', 'point_index', 'truth_rel', 'est_rel', 'success'])


def _stats(values):
    values = [value for value in values if value is not None and np.isfinite(value)]
    if not values:
        return None
    return {'mean': float(np.mean(values)), 'sd': float(np.std(values)), 'median': float(np.median(values))}


def summarize_benchmark(name, method, results):
    frame = benchmark_frame(results)
    points = []
    if not frame.empty:
        grouped = frame.groupby('point_index').agg(
            truth_rel=('truth_rel', 'first'),
            mean=('est_rel', 'mean'),
            sd=('est_rel', lambda values: float(np.std(values.dropna())) if values.notna().any() else np.nan),
            selection_rate=('success', 'mean'),
        )
        points = [
            {key: (None if pd.isna(value) else float(value)) for key, value in row.items()}
            for row in grouped.reset_index(drop=True).to_dict('records')
        ]
    metrics = [result['metrics'] for result in results]
    m_hats = [result['metrics']['m_hat'] for result in results]
    relative = [metric['relative_errors'] for metric in metrics if metric.get('relative_errors')]
    return {
        'scenario': name,
        'method': method,
        'replicates': len(results),
        'realised': next((result['realised'] for result in results if result.get('realised')), None),
        'points': points,
        'm_hat': {
            'mean': float(np.mean(m_hats)) if m_hats else None,
            'counts': {str(k): int(v) for k, v in pd.Series(m_hats, dtype=int).value_counts().sort_index().items()},
        },
        'hausdorff': _stats([metric.get('hausdorff') for metric in metrics]),
        'sensitivity': _stats([metric.get('sensitivity') for metric in metrics]),
        'specificity': _stats([metric.get('specificity') for metric in metrics]),
        'relative_errors': {
            part: _stats([entry[part] for entry in relative]) for part in ('total', 'sparse', 'lowrank')
        } if relative else None,
        'rank_estimates': _mean_ranks([metric.get('rank_estimates') for metric in metrics]),
        'runtime': {
            'total': float(sum(result['elapsed'] for result in results)),
            'mean': float(np.mean([result['elapsed'] for result in results])) if results else None,
        },
    }


def _mean_ranks(rank_lists):
    rank_lists = [ranks for ranks in rank_lists if ranks]
    if not rank_lists or len({len(ranks) for ranks in rank_lists}) != 1:
        return None
    return np.mean(np.array(rank_lists, dtype=float), axis=0).tolist()


def run_benchmark(name, replicates=None, base_seed=None, method='two-step', options=None):
    """Replicates through the Celery task; seeds are base_seed + replicate index."""
    from .tasks import run_replicate_task

    replicates = int(replicates if replicates is not None else settings.LSVAR_REPLICATES)
    base_seed = int(base_seed if base_seed is not None else settings.LSVAR_BASE_SEED)
    if replicates < 1:
        raise InvalidInputError(f"replicates must be >= 1, got {replicates}")
    pending = [run_replicate_task.delay(name, base_seed + k, method, options or {}) for k in range(replicates)]
    results = [job.get() for job in pending]
    summary = summarize_benchmark(name, method, results)
    realised = summary['realised'] or {}
    logger.info(
        f"Benchmark {name}/{method}: {replicates} replicates done; realised v_L={realised.get('v_L')} "
        f"v_S={realised.get('v_S')} snr={realised.get('snr')} contraction={realised.get('contraction')}"
    )
    return benchmark_frame(results), summary


def estimation_error_curve(model, sizes, replicates, seed, penalty=None, opts=None):
    """Median Frobenius error of (L_hat, S_hat) per sample size on a single-segment model."""
    if model.m0 != 0:
        raise InvalidInputError("Estimation error curves need a stationary (single segment) model")
    segment = model.segments[0]
    penalty = penalty or PenaltyConfig(alpha_L=segment.alpha_L if math.isfinite(segment.alpha_L) else 1.0)
    opts = opts or SolverOptions()

    def error(job):
        N, k = job
        data = simulate_piecewise_var(model, N + 1, seed + k)
        lambda_, mu = segment_phase_tuning(N, model.p, penalty.alpha_L, penalty)
        fit = fit_lowrank_sparse(data, (0, N + 1), penalty.with_weights(lambda_, mu), opts)
        return N, math.sqrt(np.linalg.norm(fit.L_hat - segment.L) ** 2 + np.linalg.norm(fit.S_hat - segment.S) ** 2)

    results = parallel_map(error, [(N, k) for N in sizes for k in range(replicates)])
    curve = []
    for N in sizes:
        errors = [value for size, value in results if size == N]
        curve.append({'N': int(N), 'median_error': float(np.median(errors))})
    return curve


def stationary_model(pair, noise_std=0.1):
    return PiecewiseVarModel([], [pair], noise_std=noise_std)
