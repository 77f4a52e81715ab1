"""Penalized least-squares estimation of VAR(1) transition matrices on an interval."""
import logging
import math
from dataclasses import dataclass

import numpy as np
from django.conf import settings

from lsvar.exceptions import DegenerateIntervalError, InvalidInputError, SolverDivergenceError
from lsvar.parallel import parallel_map
from var_model.utils import project_onto_omega
from .domain import GRID_MAX, GRID_MIN, FitResult, PenaltyConfig, SolverOptions
from .prox import singular_value_threshold, soft_threshold

logger = logging.getLogger(__name__)

# Consecutive objective increases tolerated before the solver gives up.
MAX_CONSECUTIVE_INCREASES = 10
GRID_SIZE = 20
GRID_HOLDOUT_EVERY = 5


@dataclass
class GramStats:
    """Sufficient statistics of the pairs (X_{t-1}, X_t) used by a fit."""
    Szz: np.ndarray
    Syz: np.ndarray
    syy: float
    n: int

    @classmethod
    def from_pairs(cls, Z, Y):
        return cls(Z.T @ Z, Y.T @ Z, float(np.sum(Y * Y)), Z.shape[0])

    def rss(self, A):
        value = self.syy - 2.0 * np.sum(A * self.Syz) + np.sum((A @ self.Szz) * A)
        return max(float(value), 0.0)

    def gradient(self, A):
        """Gradient of rss(A) / n."""
        return (2.0 / self.n) * (A @ self.Szz - self.Syz)

    def lipschitz(self):
        if self.n == 0:
            return 0.0
        return (2.0 / self.n) * float(np.linalg.eigvalsh(self.Szz)[-1])


def transition_pairs(data, interval):
    """Lagged design Z (rows X_{t-1}) and responses Y (rows X_t) for t = b+1..e-1."""
    b, e = interval
    if b < 0 or e > data.T or b >= e:
        raise InvalidInputError(f"Interval [{b}, {e}) is outside the series of length {data.T}")
    if e - b - 1 < 2:
        raise DegenerateIntervalError(
            f"Interval [{b}, {e}) has {max(e - b - 1, 0)} transition pairs; at least 2 are needed"
        )
    X = data.values
    return X[b:e - 1], X[b + 1:e]


def interval_stats(data, interval):
    return GramStats.from_pairs(*transition_pairs(data, interval))


def residual_sum(data, interval, A):
    """Unnormalized sum of ||X_t - A X_{t-1}||^2 over the pairs of `interval`."""
    b, e = interval
    if e - b < 2:
        return 0.0
    X = data.values
    residuals = X[b + 1:e] - X[b:e - 1] @ np.asarray(A).T
    return float(np.sum(residuals * residuals))


def ols_transition(data, interval):
    """Unpenalized least-squares transition matrix."""
    Z, Y = transition_pairs(data, interval)
    coef, *_ = np.linalg.lstsq(Z, Y, rcond=None)
    return coef.T


def _step_size(stats, opts):
    if opts.step_size != 'auto':
        return float(opts.step_size)
    lipschitz = stats.lipschitz()
    return 1.0 / lipschitz if lipschitz > 0 else 1.0


def _check_progress(previous, current, increases, partial):
    if not math.isfinite(current):
        raise SolverDivergenceError("Objective became non-finite", partial=partial())
    if current > previous + 1e-10 * max(1.0, abs(previous)):
        increases += 1
        if increases >= MAX_CONSECUTIVE_INCREASES:
            raise SolverDivergenceError(
                f"Objective increased {increases} iterations in a row", partial=partial()
            )
        return increases
    return 0


def solve_lowrank_sparse(stats, lambda_, mu, alpha_L, opts):
    """Alternating proximal gradient on rss/n + lambda*|S|_1 + mu*|L|_* with L in Omega."""
    p = stats.Szz.shape[0]
    step = _step_size(stats, opts)

    def objective(L, S):
        return (stats.rss(L + S) / stats.n + lambda_ * np.abs(S).sum()
                + mu * np.linalg.norm(L, 'nuc'))

    L = np.zeros((p, p))
    S = np.zeros((p, p))
    current = objective(L, S)
    history = [current]
    converged = False
    increases = 0
    iteration = 0

    def partial():
        return FitResult(L, S, current, iteration, False, stats.rss(L + S), stats.n, lambda_, mu, history)

    for iteration in range(1, opts.max_iterations + 1):
        S = soft_threshold(S - step * stats.gradient(L + S), step * lambda_)
        after_sparse = objective(L, S)

        L_candidate = project_onto_omega(
            singular_value_threshold(L - step * stats.gradient(L + S), step * mu), alpha_L
        )
        after_low_rank = objective(L_candidate, S)
        # Clipping after the nuclear prox is not an exact prox; keep L when it does not descend.
        if after_low_rank <= after_sparse:
            L = L_candidate
            updated = after_low_rank
        else:
            updated = after_sparse

        increases = _check_progress(current, updated, increases, partial)
        decrease = (current - updated) / max(abs(current), 1e-300)
        current = updated
        history.append(current)
        if decrease < opts.rel_tolerance:
            converged = True
            break

    if not converged:
        logger.warning(f"Low-rank plus sparse fit stopped at {iteration} iterations without converging")
    return FitResult(L, S, float(current), iteration, converged, stats.rss(L + S), stats.n,
                     float(lambda_), float(mu), history)


def solve_lasso(stats, lambda_w, opts):
    """Proximal gradient (ISTA) on rss/n + lambda_w*|A|_1."""
    p = stats.Szz.shape[0]
    step = _step_size(stats, opts)

    def objective(A):
        return stats.rss(A) / stats.n + lambda_w * np.abs(A).sum()

    A = np.zeros((p, p))
    current = objective(A)
    history = [current]
    converged = False
    increases = 0
    iteration = 0

    def partial():
        return FitResult(np.zeros((p, p)), A, current, iteration, False, stats.rss(A), stats.n,
                         lambda_w, 0.0, history)

    for iteration in range(1, opts.max_iterations + 1):
        A = soft_threshold(A - step * stats.gradient(A), step * lambda_w)
        updated = objective(A)
        increases = _check_progress(current, updated, increases, partial)
        decrease = (current - updated) / max(abs(current), 1e-300)
        current = updated
        history.append(current)
        if decrease < opts.rel_tolerance:
            converged = True
            break

    if not converged:
        logger.warning(f"Weakly sparse fit stopped at {iteration} iterations without converging")
    return FitResult(np.zeros((p, p)), A, float(current), iteration, converged, stats.rss(A), stats.n,
                     float(lambda_w), 0.0, history)


def fit_lowrank_sparse(data, interval, penalty, opts=None):
    """Fit (L, S) on the transition pairs t = b+1..e-1 of `interval` = [b, e)."""
    opts = opts or SolverOptions()
    if penalty.lambda_ < 0 or penalty.mu < 0:
        raise InvalidInputError("Penalty weights must be nonnegative")
    stats = interval_stats(data, interval)
    result = solve_lowrank_sparse(stats, penalty.lambda_, penalty.mu, penalty.alpha_L, opts)
    logger.debug(
        f"Fit on [{interval[0]}, {interval[1]}): objective {result.objective_value:.6g} "
        f"after {result.iterations} iterations"
    )
    return result


def weakly_sparse_fit(data, interval, lambda_w, opts=None):
    """Lasso fit as a FitResult with the transition held in S_hat and L_hat = 0."""
    opts = opts or SolverOptions()
    if lambda_w < 0:
        raise InvalidInputError(f"lambda_w must be nonnegative, got {lambda_w}")
    return solve_lasso(interval_stats(data, interval), lambda_w, opts)


def fit_weakly_sparse(data, interval, lambda_w, opts=None):
    return weakly_sparse_fit(data, interval, lambda_w, opts).S_hat


def interval_tuning(n, p, c, c_prime):
    """(lambda, mu) of the form 4c*sqrt((log p + log n)/n), 4c'*sqrt((p + log n)/n)."""
    return (
        4 * c * math.sqrt((math.log(p) + math.log(n)) / n),
        4 * c_prime * math.sqrt((p + math.log(n)) / n),
    )


def search_phase_tuning(tau, T, p, config):
    if tau <= 1 or tau >= T:
        raise InvalidInputError(f"tau={tau} must satisfy 1 < tau < T={T}")
    lambda1, mu1 = interval_tuning(tau - 1, p, config.c0, config.c0_prime)
    lambda2, mu2 = interval_tuning(T - tau, p, config.c0, config.c0_prime)
    return lambda1, mu1, lambda2, mu2


def segment_phase_tuning(N_j, p, alpha_L, config):
    if N_j < 2:
        raise InvalidInputError(f"Segment length N_j={N_j} must be at least 2")
    if not math.isfinite(alpha_L):
        raise InvalidInputError("Segment tuning needs a finite alpha_L")
    lambda_j = 4 * config.c1 * math.sqrt(math.log(p) / N_j) + 4 * config.c1 * alpha_L / p
    mu_j = 4 * config.c1_prime * math.sqrt(p / N_j)
    return lambda_j, mu_j


def default_alpha_l(p, T, c=None):
    """c * p * sqrt(log(pT) / T)."""
    if c is None:
        c = settings.LSVAR_ALPHA_C
    return c * p * math.sqrt(math.log(p * T) / T)


def default_grid(size=GRID_SIZE, low=GRID_MIN, high=GRID_MAX):
    """Every (c0, c0') pair of an equally spaced grid, lexicographically ordered."""
    values = np.linspace(low, high, size)
    return [(float(a), float(b)) for a in values for b in values]


def grid_prediction_errors(data, interval, grid, alpha_L=math.inf, opts=None, k=GRID_HOLDOUT_EVERY):
    """Held-out one-step prediction error for every grid cell, in lexicographic cell order."""
    if not grid:
        raise InvalidInputError("Tuning grid is empty")
    b, e = interval
    if e - b < 10:
        raise InvalidInputError(f"Grid search needs an interval of length >= 10, got {e - b}")
    opts = opts or SolverOptions()
    Z, Y = transition_pairs(data, interval)
    test = np.zeros(Z.shape[0], dtype=bool)
    test[k - 1::k] = True
    train_stats = GramStats.from_pairs(Z[~test], Y[~test])
    Z_test, Y_test = Z[test], Y[test]
    n = train_stats.n

    def evaluate(cell):
        c, c_prime = cell
        lambda_, mu = interval_tuning(n, data.p, c, c_prime)
        fit = solve_lowrank_sparse(train_stats, lambda_, mu, alpha_L, opts)
        residuals = Y_test - Z_test @ fit.transition.T
        return c, c_prime, lambda_, mu, float(np.mean(np.sum(residuals * residuals, axis=1)))

    return parallel_map(evaluate, sorted(grid))


def select_tuning_constants(data, interval, grid, alpha_L=math.inf, opts=None):
    """(c0, c0') with the smallest held-out error; the first cell wins ties."""
    best = None
    for c, c_prime, _, _, error in grid_prediction_errors(data, interval, grid, alpha_L, opts):
        if best is None or error < best[2]:
            best = (c, c_prime, error)
    logger.info(f"Grid search picked c0={best[0]:.4g}, c0'={best[1]:.4g} (test error {best[2]:.6g})")
    return best[0], best[1]


def tuning_grid_search(data, interval, grid, alpha_L=math.inf, opts=None):
    """(lambda, mu) with the smallest held-out one-step prediction error."""
    best = None
    for _, _, lambda_, mu, error in grid_prediction_errors(data, interval, grid, alpha_L, opts):
        if best is None or error < best[2]:
            best = (lambda_, mu, error)
    return best[0], best[1]


def estimate_rank(L_hat, rel_threshold=None):
    if rel_threshold is None:
        rel_threshold = settings.LSVAR_RANK_THRESHOLD
    if not 0 < rel_threshold < 1:
        raise InvalidInputError(f"rel_threshold must lie in (0, 1), got {rel_threshold}")
    singular_values = np.linalg.svd(np.asarray(L_hat, dtype=float), compute_uv=False)
    if singular_values.size == 0 or singular_values[0] == 0:
        return 0
    return int(np.sum(singular_values > rel_threshold * singular_values[0]))


def sparse_support_size(S_hat, threshold=None):
    if threshold is None:
        threshold = settings.LSVAR_SUPPORT_THRESHOLD
    return int(np.sum(np.abs(S_hat) > threshold))


def penalty_for_data(data, alpha_c=None, **constants):
    """PenaltyConfig with the default alpha_L for this series."""
    return PenaltyConfig(alpha_L=default_alpha_l(data.p, data.T, alpha_c), **constants)
