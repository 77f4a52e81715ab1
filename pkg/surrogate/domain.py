"""Weakly sparse surrogate configuration."""
from dataclasses import dataclass

from django.conf import settings

from lsvar.exceptions import InvalidInputError

DEFAULT_Q = 0.4
# eta_j = ETA_FRACTION * lambda_j when no explicit level is configured.
ETA_FRACTION = 0.05


@dataclass
class WeaklySparseConfig:
    q: float = DEFAULT_Q
    R_q: float = 1.0
    eta: float = None
    lambda_w: float = 0.0
    c0_w: float = None

    def __post_init__(self):
        if not 0 < self.q < 1:
            raise InvalidInputError(f"q must lie in (0, 1), got {self.q}")
        if not self.R_q > 0:
            raise InvalidInputError(f"R_q must be positive, got {self.R_q}")
        if self.eta is not None and not self.eta > 0:
            raise InvalidInputError(f"eta must be positive, got {self.eta}")
        if self.lambda_w < 0:
            raise InvalidInputError(f"lambda_w must be nonnegative, got {self.lambda_w}")
        if self.c0_w is None:
            self.c0_w = float(settings.LSVAR_C0)
        if self.c0_w <= 0:
            raise InvalidInputError(f"Surrogate tuning constant c0_w must be positive, got {self.c0_w}")

    def eta_for(self, lambda_):
        """Thresholding level for a segment fitted with penalty `lambda_`."""
        return self.eta if self.eta is not None else ETA_FRACTION * lambda_

    def to_dict(self):
        return {
            'q': self.q, 'R_q': self.R_q, 'eta': self.eta, 'lambda_w': self.lambda_w,
            'c0_w': self.c0_w,
        }


@dataclass
class Applicability:
    q: float
    R_q: float
    radius_lower_bound: float
    source: str = 'model'

    @property
    def applicable(self):
        return self.R_q >= self.radius_lower_bound

    def to_dict(self):
        return {
            'q': self.q,
            'R_q': self.R_q,
            'radius_lower_bound': self.radius_lower_bound,
            'applicable': self.applicable,
            'source': self.source,
        }
