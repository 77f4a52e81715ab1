"""Penalty, solver and fit records for interval estimation."""
import math
from dataclasses import dataclass, field, replace

import numpy as np
from django.conf import settings

from lsvar.exceptions import InvalidInputError

GRID_MIN = 0.001
GRID_MAX = 10.0


@dataclass
class PenaltyConfig:
    """Penalty weights plus the constants of the search and segment tuning formulas."""
    lambda_: float = 0.0
    mu: float = 0.0
    alpha_L: float = math.inf
    c0: float = None
    c0_prime: float = None
    c1: float = None
    c1_prime: float = None

    def __post_init__(self):
        for name, setting in (('c0', 'LSVAR_C0'), ('c0_prime', 'LSVAR_C0_PRIME'),
                              ('c1', 'LSVAR_C1'), ('c1_prime', 'LSVAR_C1_PRIME')):
            if getattr(self, name) is None:
                setattr(self, name, float(getattr(settings, setting)))
            value = getattr(self, name)
            if not GRID_MIN <= value <= GRID_MAX:
                raise InvalidInputError(f"{name}={value} is outside [{GRID_MIN}, {GRID_MAX}]")
        for name in ('lambda_', 'mu', 'alpha_L'):
            if getattr(self, name) < 0:
                raise InvalidInputError(f"{name} must be nonnegative, got {getattr(self, name)}")

    def with_weights(self, lambda_, mu):
        return replace(self, lambda_=float(lambda_), mu=float(mu))

    def to_dict(self):
        return {
            'lambda': self.lambda_, 'mu': self.mu, 'alpha_L': self.alpha_L,
            'c0': self.c0, 'c0_prime': self.c0_prime, 'c1': self.c1, 'c1_prime': self.c1_prime,
        }


@dataclass
class SolverOptions:
    max_iterations: int = None
    rel_tolerance: float = None
    step_size: object = 'auto'

    def __post_init__(self):
        if self.max_iterations is None:
            self.max_iterations = int(settings.LSVAR_MAX_ITERATIONS)
        if self.rel_tolerance is None:
            self.rel_tolerance = float(settings.LSVAR_REL_TOLERANCE)
        if self.max_iterations < 1:
            raise InvalidInputError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not self.rel_tolerance > 0:
            raise InvalidInputError(f"rel_tolerance must be positive, got {self.rel_tolerance}")
        if self.step_size != 'auto' and not float(self.step_size) > 0:
            raise InvalidInputError(f"step_size must be positive or 'auto', got {self.step_size}")


@dataclass
class FitResult:
    L_hat: np.ndarray
    S_hat: np.ndarray
    objective_value: float
    iterations: int
    converged: bool
    rss: float = float('nan')
    n_pairs: int = 0
    lambda_: float = 0.0
    mu: float = 0.0
    history: list = field(default_factory=list, repr=False)

    @property
    def transition(self):
        return self.L_hat + self.S_hat

    @property
    def penalized_cost(self):
        """Unnormalized residual sum plus penalty terms, the per-segment term of the IC."""
        return float(
            self.rss
            + self.lambda_ * np.abs(self.S_hat).sum()
            + self.mu * np.linalg.norm(self.L_hat, 'nuc')
        )

    def to_dict(self, rank_threshold=None, support_threshold=None):
        from estimation.utils import estimate_rank, sparse_support_size

        if rank_threshold is None:
            rank_threshold = settings.LSVAR_RANK_THRESHOLD
        if support_threshold is None:
            support_threshold = settings.LSVAR_SUPPORT_THRESHOLD
        return {
            'L': self.L_hat.tolist(),
            'S': self.S_hat.tolist(),
            'objective': self.objective_value,
            'iterations': self.iterations,
            'converged': self.converged,
            'rank_estimate': estimate_rank(self.L_hat, rank_threshold),
            'sparse_support_size': sparse_support_size(self.S_hat, support_threshold),
        }
