"""Ingestion, preprocessing and command dispatch for the lsvar CLI."""
import json
import logging
import re
from dataclasses import replace

import numpy as np
import pandas as pd

from estimation.domain import SolverOptions
from estimation.utils import default_grid, penalty_for_data, select_tuning_constants
from evaluation.scenarios import generate_scenario
from evaluation.utils import default_window, evaluate_detection, run_benchmark
from lsvar.exceptions import IngestionError, InternalError, InvalidInputError, LsvarError
from lsvar.storage import write_frame, write_json
from multi_detect.utils import dp_detect, default_dp_gamma, plan_windows, two_step_detect, write_window_curves
from single_detect.utils import default_search_domain, exhaustive_search, write_curve_tsv
from surrogate.domain import WeaklySparseConfig
from surrogate.utils import combined_strategy, surrogate_detect_multi
from var_model.domain import PiecewiseVarModel, TimeSeriesData

logger = logging.getLogger(__name__)


def _is_number(cell):
    try:
        float(cell)
    except (TypeError, ValueError):
        return False
    return True


def ingest_csv(path):
    """Numeric CSV with rows as time and columns as series; a non-numeric first row is a header."""
    try:
        raw = pd.read_csv(
            path, header=None, dtype=str, keep_default_na=False, skip_blank_lines=True, encoding='utf-8'
        )
    except FileNotFoundError as exc:
        raise IngestionError(f"Input file {path} does not exist") from exc
    except UnicodeDecodeError as exc:
        raise IngestionError(f"Input file {path} is not UTF-8 text: {exc}") from exc
    except pd.errors.EmptyDataError as exc:
        raise IngestionError(f"Input file {path} is empty") from exc
    except pd.errors.ParserError as exc:
        match = re.search(r'line (\d+)', str(exc))
        row = int(match.group(1)) if match else None
        raise IngestionError(f"Ragged row {row} in {path}: {exc}", row=row) from exc
    except OSError as exc:
        raise IngestionError(f"Cannot read {path}: {exc}") from exc

    has_header = not all(_is_number(cell) for cell in raw.iloc[0])
    columns = [str(cell).strip() for cell in raw.iloc[0]] if has_header else [f'x{k + 1}' for k in range(raw.shape[1])]
    body = raw.iloc[1:] if has_header else raw
    first_line = 2 if has_header else 1

    ragged = body.isna().any(axis=1).to_numpy()
    if ragged.any():
        row = first_line + int(np.argmax(ragged))
        raise IngestionError(f"Ragged row {row} in {path}: expected {raw.shape[1]} fields", row=row)

    numeric = body.apply(pd.to_numeric, errors='coerce')
    bad = numeric.isna().to_numpy()
    if bad.any():
        i, k = np.argwhere(bad)[0]
        row, column = first_line + int(i), int(k) + 1
        raise IngestionError(
            f"Non-numeric cell {body.iat[i, k]!r} at row {row}, column {column} in {path}", row=row, column=column
        )
    if len(numeric) < 2:
        raise IngestionError(f"Input file {path} holds {len(numeric)} numeric rows; need at least 2")

    logger.info(f"Read {len(numeric)} x {numeric.shape[1]} observations from {path}")
    return TimeSeriesData(numeric.to_numpy(dtype=float), {'source': str(path), 'columns': columns})


def detrend_period_average(data, d):
    """X_l minus the average of X_{l+1}..X_{l+d}; the last d observations have no full window and are dropped."""
    d = int(d)
    if not 1 <= d < data.T:
        raise InvalidInputError(f"Detrending period must satisfy 1 <= d < T = {data.T}, got {d}")
    frame = pd.DataFrame(data.values)
    trend = frame.rolling(d).mean().shift(-d).iloc[:data.T - d]
    detrended = frame.iloc[:data.T - d] - trend
    if detrended.shape[0] < 2:
        raise InvalidInputError(f"Detrending with d={d} leaves fewer than 2 observations")
    return TimeSeriesData(detrended.to_numpy(), dict(data.metadata, detrend_period=d))


def subsample(data, stride):
    """Every stride-th observation, starting with the first."""
    stride = int(stride)
    if stride < 1:
        raise InvalidInputError(f"Stride must be >= 1, got {stride}")
    if stride == 1:
        return data
    return TimeSeriesData(data.values[::stride].copy(), dict(data.metadata, stride=stride))


def load_series(config):
    data = ingest_csv(config.input_path)
    if config.detrend_period:
        data = detrend_period_average(data, config.detrend_period)
    return subsample(data, config.stride)


def load_json(path):
    try:
        with open(path, encoding='utf-8') as handle:
            return json.load(handle)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path} is not valid JSON: {exc}") from exc


def penalty_for_run(data, config, opts):
    penalty = penalty_for_data(data, config.alpha_c)
    if config.tune:
        grid = default_grid(config.grid_size, config.grid_min, config.grid_max)
        c0, c0_prime = select_tuning_constants(data, (0, data.T), grid, penalty.alpha_L, opts)
        penalty = replace(penalty, c0=c0, c0_prime=c0_prime)
    return penalty


def simulate(config):
    model, data = generate_scenario(config.scenario, config.seed)
    write_json(config.output_dir / 'model.json', model.to_dict())
    columns = [f'x{k + 1}' for k in range(data.p)]
    write_frame(config.output_dir / 'data.csv', pd.DataFrame(data.values, columns=columns))
    logger.info(f"Simulated {config.scenario} (seed {config.seed}): T={data.T}, p={data.p}")


def detect_single(config):
    data = load_series(config)
    opts = SolverOptions()
    penalty = penalty_for_run(data, config, opts)
    domain = default_search_domain(data.T, 0, 0, 0.0)
    detection = exhaustive_search(data, domain, penalty, opts)
    write_curve_tsv(config.output_dir / 'curve.tsv', detection.objective_curve)
    report = {
        'T': data.T, 'p': data.p, 'config': config.to_dict(), 'penalty': penalty.to_dict(),
        'change_points': [detection.tau_hat], 'search_domain': [domain.lower, domain.upper],
    }
    report.update(detection.to_dict())
    write_json(config.output_dir / 'report.json', report)
    logger.info(f"Single change point at tau={detection.tau_hat}")


def detect_multi(config):
    data = load_series(config)
    opts = SolverOptions()
    penalty = penalty_for_run(data, config, opts)
    h = config.window_size or default_window(data.T)
    l = config.shift or max(1, h // 4)
    surrogate_config = WeaklySparseConfig(q=config.q)

    if config.method == 'two-step':
        detection = two_step_detect(data, h, l, penalty, opts, config.omega, refine=config.refine)
    elif config.method == 'dp':
        gamma = config.gamma if config.gamma is not None else default_dp_gamma(data, h, l, penalty, opts)
        detection = dp_detect(data, gamma, penalty, opts)
    elif config.method == 'surrogate':
        detection = surrogate_detect_multi(data, plan_windows(data.T, h, l), surrogate_config, opts, config.omega)
    else:
        detection = combined_strategy(data, h, l, surrogate_config, penalty, opts, config.omega)

    if detection.candidates is not None:
        write_window_curves(config.output_dir, detection.candidates)
    report = {'T': data.T, 'p': data.p, 'config': config.to_dict(), 'penalty': penalty.to_dict()}
    report.update(detection.to_dict(data.T))
    write_json(config.output_dir / 'report.json', report)
    logger.info(f"{config.method} found {detection.m_hat} change points: {detection.change_points}")


def benchmark(config):
    frame, summary = run_benchmark(
        config.scenario, config.replicates, config.seed, config.method, config.method_options()
    )
    write_frame(config.output_dir / 'benchmark.csv', frame)
    write_json(config.output_dir / 'summary.json', summary)


def evaluate(config):
    """Score the change points of a report against a model document."""
    report = load_json(config.input_path)
    model = PiecewiseVarModel.from_dict(load_json(config.model_path))
    if 'change_points' not in report or 'T' not in report:
        raise InvalidInputError(f"{config.input_path} is not a detection report (needs T and change_points)")
    metrics = evaluate_detection(report['change_points'], model, int(report['T']))
    write_json(config.output_dir / 'metrics.json', metrics.to_dict())


HANDLERS = {
    'simulate': simulate,
    'detect-single': detect_single,
    'detect-multi': detect_multi,
    'detect-dp': detect_multi,
    'detect-surrogate': detect_multi,
    'detect-combined': detect_multi,
    'benchmark': benchmark,
    'evaluate': evaluate,
}


def write_error(output_dir, exc):
    """Write error.json and return the exit status of `exc`."""
    logger.error(f"{type(exc).__name__}: {exc}")
    if output_dir is not None:
        write_json(output_dir / 'error.json', exc.to_dict())
    return exc.exit_status


def run(config):
    """Execute one configured command; 0 on success, the error's exit status otherwise."""
    config.output_dir.mkdir(parents=True, exist_ok=True)
    try:
        HANDLERS[config.command](config)
    except LsvarError as exc:
        return write_error(config.output_dir, exc)
    except Exception as exc:
        logger.exception(f"{config.command} failed unexpectedly")
        return write_error(config.output_dir, InternalError(f"{type(exc).__name__}: {exc}"))
    return 0
