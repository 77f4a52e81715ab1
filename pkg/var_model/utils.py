"""Simulation and structural checks for piecewise VAR(1) models."""
import logging

import numpy as np
from django.conf import settings

from lsvar.exceptions import InvalidInputError, UndefinedMetricError, UnstableModelError
from .domain import TimeSeriesData

logger = logging.getLogger(__name__)

# A segment is rejected once its spectral radius reaches 1 - STABILITY_MARGIN.
STABILITY_MARGIN = 1e-8


def spectral_radius(A):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"Transition matrix must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError("Transition matrix has non-finite entries")
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def check_stability(A):
    """True when A has spectral radius below one."""
    return spectral_radius(A) < 1 - STABILITY_MARGIN


def random_orthonormal(seed, p):
    """Random p x p orthonormal matrix (QR of a Gaussian draw, signs fixed)."""
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((p, p)))
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def low_rank_from_basis(U, singular_values):
    """Sum of sigma_l u_l u_l' over the leading columns of U."""
    singular_values = np.asarray(singular_values, dtype=float)
    p = U.shape[0]
    if singular_values.size == 0:
        return np.zeros((p, p))
    basis = U[:, :singular_values.size]
    return (basis * singular_values) @ basis.T


def build_low_rank_component(seed, p, rank, singular_values):
    if rank < 0 or rank > p:
        raise InvalidInputError(f"Rank must lie in [0, p={p}], got {rank}")
    singular_values = list(singular_values)[:rank]
    if len(singular_values) < rank:
        raise InvalidInputError(f"Rank {rank} needs {rank} singular values, got {len(singular_values)}")
    if any(value <= 0 for value in singular_values):
        raise InvalidInputError(f"Singular values must be positive, got {singular_values}")
    return low_rank_from_basis(random_orthonormal(seed, p), singular_values)


def information_ratio(pair):
    """Max-abs entry of L over max-abs entry of S."""
    sparse_norm = float(np.max(np.abs(pair.S), initial=0.0))
    if sparse_norm == 0.0:
        raise UndefinedMetricError("Information ratio is undefined when S is identically zero")
    return float(np.max(np.abs(pair.L), initial=0.0)) / sparse_norm


def project_onto_omega(L, alpha_L):
    """Entrywise clip of L to [-alpha_L/p, alpha_L/p]."""
    if alpha_L < 0:
        raise InvalidInputError(f"alpha_L must be nonnegative, got {alpha_L}")
    L = np.asarray(L, dtype=float)
    bound = alpha_L / L.shape[0]
    return np.clip(L, -bound, bound)


def simulate_piecewise_var(model, T, seed, burn_in=None):
    """Draw T observations from `model`, discarding a burn-in under the first segment."""
    if burn_in is None:
        burn_in = settings.LSVAR_BURN_IN
    if model.change_points and T <= model.change_points[-1]:
        raise InvalidInputError(f"T={T} must exceed the last change point {model.change_points[-1]}")
    if T < 2:
        raise InvalidInputError(f"T must be at least 2, got {T}")
    for index, segment in enumerate(model.segments):
        radius = spectral_radius(segment.transition)
        if radius >= 1 - STABILITY_MARGIN:
            raise UnstableModelError(
                f"Segment {index} is not stable: spectral radius {radius:.6f} >= 1",
                segment=index,
                spectral_radius=radius,
            )

    p = model.p
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, model.noise_std, size=(burn_in + T - 1, p)) if model.noise_std > 0 \
        else np.zeros((burn_in + T - 1, p))
    transitions = model.transitions()

    state = np.zeros(p)
    for k in range(burn_in):
        state = transitions[0] @ state + noise[k]

    values = np.empty((T, p))
    values[0] = state
    for t in range(1, T):
        A = transitions[model.segment_index(t)]
        values[t] = A @ values[t - 1] + noise[burn_in + t - 1]

    logger.debug(f"Simulated T={T}, p={p}, m0={model.m0} with seed {seed}")
    return TimeSeriesData(values, {'seed': seed, 'change_points': list(model.change_points)})
