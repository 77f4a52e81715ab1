"""Simulation scenario catalog and model construction."""
import logging
from functools import lru_cache

import numpy as np
from scipy import optimize

from lsvar.exceptions import InvalidInputError
from var_model.domain import LowRankSparsePair, PiecewiseVarModel
from var_model.utils import (
    check_stability,
    information_ratio,
    low_rank_from_basis,
    random_orthonormal,
    simulate_piecewise_var,
    spectral_radius,
)
from .domain import Scenario

logger = logging.getLogger(__name__)

# Largest spectral radius after contracting a nominally unstable scenario.
CONTRACTED_RADIUS = 0.95
SUPPORT_SEED = 20
# Basis draws tried before a scenario falls back to contraction.
MAX_BASIS_DRAWS = 50


def _single(name, v_L, v_S, gamma, ranks, p=20, T=300, tau=0.5):
    return Scenario(name, p, T, (tau,), ranks, (v_L,), (v_S,), gamma)


def _multi(name, p, T, tau_rel, ranks, v_L, v_S, gamma=0.25, pattern='off_diagonal'):
    m = len(tau_rel)
    v_L = tuple(v_L) if isinstance(v_L, tuple) else (v_L,) * m
    v_S = tuple(v_S) if isinstance(v_S, tuple) else (v_S,) * m
    return Scenario(name, p, T, tuple(tau_rel), tuple(ranks), v_L, v_S, (gamma,) * (m + 1), pattern=pattern)


def _catalog():
    scenarios = []
    for i, v_L in enumerate((0.10, 0.25, 0.50), start=1):
        scenarios.append(_single(f'A.{i}', v_L, 1.5, (0.25, 0.25), (1, 3)))
    for i, v_L in enumerate((0.25, 0.5, 0.75), start=1):
        scenarios.append(_single(f'B.{i}', v_L, 2.0, (2.0, 2.0), (1, 2)))
    for i, gamma_1 in enumerate((1.75, 1.25, 1.0, 0.5), start=1):
        scenarios.append(_single(f'C.{i}', 0.25, 2.0, (gamma_1, 2.0), (1, 2)))
    for i, v_L in enumerate((3.0, 3.5, 4.0), start=1):
        scenarios.append(_single(f'D.{i}', v_L, 0.75, (1.5, 1.5), (1, 2)))
    for i, v_L in enumerate((2.5, 3.0, 4.5), start=1):
        scenarios.append(_single(f'E.{i}', v_L, 0.15, (0.25, 0.25), (1, 3)))
    for i, gamma_2 in enumerate((0.45, 0.75, 0.95), start=1):
        scenarios.append(_single(f'F.{i}', 2.5, 0.25, (0.5, gamma_2), (1, 2)))

    high = {'p': 80, 'T': 200}
    scenarios += [
        _single('G.1', 0.20, 0.75, (0.25, 0.25), (1, 3), **high),
        _single('G.2', 0.40, 0.75, (0.25, 0.25), (1, 3), **high),
        _single('G.3', 0.20, 0.75, (0.25, 0.25), (1, 3), tau=0.2, **high),
        _single('G.4', 0.20, 0.75, (0.25, 0.25), (1, 3), tau=0.8, **high),
        _single('G.5', 0.20, 0.75, (0.25, 0.25), (3, 1), **high),
        _single('G.6', 0.20, 0.75, (0.25, 0.25), (3, 3), **high),
        _single('G.7', 0.20, 0.75, (0.25, 0.25), (5, 3), **high),
        _single('G.8', 0.45, 0.40, (0.75, 0.75), (1, 3), p=50, T=200),
    ]

    sixths = (1 / 6, 2 / 6, 3 / 6, 4 / 6, 5 / 6)
    thirds = (1 / 3, 2 / 3)
    scenarios += [
        _multi('L.1', 20, 1200, sixths, (1,) * 6, 0.10, 1.5),
        _multi('L.2', 20, 1800, (0.10, 0.25, 0.40, 0.60, 0.80), (3,) * 6, 0.10, 1.5),
        _multi('L.3', 20, 2400, (0.10, 0.30, 0.50, 0.70, 0.90), (1, 2, 3, 3, 2, 1), 0.10, 1.5),
        _multi('M.1', 100, 1200, thirds, (1, 1, 1), 0.25, 1.5),
        _multi('M.2', 125, 1800, thirds, (1, 1, 1), 0.30, 1.5),
        _multi('N.1', 20, 300, thirds, (1, 3, 2), (0.35, 0.25), (2.5, 3.0), pattern='random'),
        _multi('N.2', 20, 300, (1 / 6, 5 / 6), (1, 3, 2), (0.35, 0.25), (2.5, 3.0), pattern='random'),
        _multi('N.3', 20, 300, thirds, (1, 3, 2), (0.5, 0.5), (3.0, 3.0), pattern='random'),
        _multi('L.1-desk', 10, 600, sixths, (1,) * 6, 0.10, 1.5),
        _multi('DP.1', 20, 240, thirds, (1, 1, 1), 0.10, 1.5),
    ]
    for label, v in (('0.27', 0.8), ('0.33', 1.0), ('0.53', 1.6)):
        scenarios.append(_multi(f'SNR-{label}', 20, 300, thirds, (1, 1, 1), 0.0, v))
    scenarios.append(Scenario(
        'EEG-SIM', 21, 300, thirds, (1, 3, 1), (0.2, 0.2), (1.0, 1.0), (1.0, 1.0, 1.0),
        pattern='banded', sparse_magnitudes=(0.4, -0.6, 0.4), sigma_base=0.2,
        description='banded support with fixed sparse magnitudes',
    ))
    return {scenario.name: scenario for scenario in scenarios}


CATALOG = _catalog()


def get_scenario(name):
    try:
        return CATALOG[name]
    except KeyError:
        raise InvalidInputError(f"Unknown scenario {name!r}; choose one of {', '.join(sorted(CATALOG))}") from None


def sparse_pattern(scenario):
    """Sign pattern shared by every sparse component of the scenario."""
    p = scenario.p
    P = np.zeros((p, p))
    if scenario.pattern == 'off_diagonal':
        P[np.arange(p - 1), np.arange(1, p)] = 1.0
    elif scenario.pattern == 'banded':
        P[np.arange(p - 1), np.arange(1, p)] = 1.0
        P[np.arange(1, p), np.arange(p - 1)] = 1.0
    elif scenario.pattern == 'random':
        rng = np.random.default_rng(SUPPORT_SEED)
        off_diagonal = np.flatnonzero(~np.eye(p, dtype=bool))
        chosen = rng.choice(off_diagonal, size=p, replace=False)
        P.flat[chosen] = rng.choice([-1.0, 1.0], size=p)
    else:
        raise InvalidInputError(f"Unknown sparse pattern {scenario.pattern!r}")
    return P


def leading_shifts(v_L):
    """Leading singular value offsets alternating up and down by the low-rank jumps."""
    shifts = [0.0]
    for j, jump in enumerate(v_L):
        shifts.append(shifts[-1] + jump if j % 2 == 0 else shifts[-1] - jump)
    return shifts


def _low_rank_parts(scenario, U, sigma_base):
    positive = [value for value in scenario.v_L if value > 0]
    extra = min(positive) if positive else 0.1
    return [
        low_rank_from_basis(U, [sigma_base + shift] + [extra] * (rank - 1))
        for shift, rank in zip(leading_shifts(scenario.v_L), scenario.ranks)
    ]


def _sparse_sizes(scenario, low_rank):
    if scenario.sparse_magnitudes is not None:
        return list(scenario.sparse_magnitudes)
    return [(-1) ** (j + 1) * np.max(np.abs(L)) / gamma for j, (L, gamma) in enumerate(zip(low_rank, scenario.gamma))]


def _sparse_gap(scenario, U, P, sigma_base):
    """Smallest surplus of a realised sparse jump over its nominal value."""
    sizes = _sparse_sizes(scenario, _low_rank_parts(scenario, U, sigma_base))
    norm = np.linalg.norm(P, 2)
    return min(abs(b - a) * norm - target for a, b, target in zip(sizes, sizes[1:], scenario.v_S))


def solve_sigma_base(scenario, U, P):
    """Leading singular value making the smallest sparse jump equal its nominal value."""
    shifts = leading_shifts(scenario.v_L)
    lower = max(0.0, -min(shifts)) + 1e-6
    if scenario.sigma_base is not None:
        return max(scenario.sigma_base, lower)

    def gap(sigma):
        return _sparse_gap(scenario, U, P, sigma)

    if gap(lower) >= 0:
        return lower
    upper = max(1.0, 2 * lower)
    for _ in range(60):
        if gap(upper) >= 0:
            break
        upper *= 2
    else:
        raise InvalidInputError(f"Scenario {scenario.name}: sparse jumps cannot reach {scenario.v_S}")
    return optimize.brentq(gap, lower, upper, xtol=1e-12)


def _family(scenario):
    return scenario.name.split('.')[0].split('-')[0]


@lru_cache(maxsize=None)
def _nominal_draw(scenario, model_seed):
    """First basis draw giving stable segments at the nominal parameters, else the least unstable one."""
    P = sparse_pattern(scenario)
    best = None
    for basis_seed in range(model_seed, model_seed + MAX_BASIS_DRAWS):
        U = random_orthonormal(basis_seed, scenario.p)
        sigma_base = solve_sigma_base(scenario, U, P)
        low_rank = _low_rank_parts(scenario, U, sigma_base)
        sparse = [size * P for size in _sparse_sizes(scenario, low_rank)]
        radius = max(spectral_radius(L + S) for L, S in zip(low_rank, sparse))
        draw = (basis_seed, sigma_base, low_rank, sparse, radius)
        if all(check_stability(L + S) for L, S in zip(low_rank, sparse)):
            return draw
        if best is None or radius < best[-1]:
            best = draw
    return best


def _required_contraction(scenario, model_seed):
    *_, low_rank, sparse, radius = _nominal_draw(scenario, model_seed)
    if all(check_stability(L + S) for L, S in zip(low_rank, sparse)):
        return 1.0
    return CONTRACTED_RADIUS / radius


def family_contraction(scenario, model_seed=0):
    """Common factor for the rows of a catalog family with no stable basis draw.

    Rows with a stable draw keep factor 1; the others share the smallest factor any of them
    needs, so their jumps keep the ordering and ratios of the nominal rows.
    """
    if _required_contraction(scenario, model_seed) == 1.0:
        return 1.0
    family = _family(scenario)
    members = [row for row in CATALOG.values() if _family(row) == family] if scenario.name in CATALOG else []
    factors = [_required_contraction(row, model_seed) for row in members + [scenario]]
    return min(factor for factor in factors if factor < 1.0)


def build_scenario_model(scenario, model_seed=0):
    basis_seed, sigma_base, low_rank, sparse, radius = _nominal_draw(scenario, model_seed)
    contraction = family_contraction(scenario, model_seed)
    low_rank = [contraction * L for L in low_rank]
    sparse = [contraction * S for S in sparse]
    if contraction < 1.0:
        logger.warning(
            f"Scenario {scenario.name}: no stable basis in {MAX_BASIS_DRAWS} draws; contracted by "
            f"{contraction:.4f} (spectral radius {radius:.4f}), jumps scale by the same factor"
        )

    alpha_L = scenario.p * max(float(np.max(np.abs(L))) for L in low_rank)
    segments = [LowRankSparsePair(L, S, alpha_L) for L, S in zip(low_rank, sparse)]
    model = PiecewiseVarModel(scenario.change_points, segments, noise_std=scenario.noise_std)
    model.metadata = {
        'scenario': scenario.to_dict(),
        'basis_seed': basis_seed,
        'sigma_base': float(sigma_base),
        'contraction': contraction,
        'jump_transition': model.jump_sizes('transition'),
        'jump_sparse': model.jump_sizes('sparse'),
        'jump_lowrank': model.jump_sizes('lowrank'),
        'information_ratio': [information_ratio(segment) for segment in segments],
        'ranks': [segment.rank() for segment in segments],
        'sparse_nonzeros': [segment.density() for segment in segments],
        'spikiness': [segment.spikiness for segment in segments],
    }
    return model


def generate_scenario(name, seed, model_seed=0, burn_in=None):
    """Model of the named scenario plus one seeded realisation of it."""
    scenario = get_scenario(name)
    model = build_scenario_model(scenario, model_seed)
    data = simulate_piecewise_var(model, scenario.T, seed, burn_in)
    data.metadata['scenario'] = name
    return model, data
