"""Scenario parameters and accuracy metrics."""
from dataclasses import dataclass, field

from lsvar.exceptions import InvalidInputError


@dataclass(frozen=True)
class Scenario:
    """Generator parameters; v_L and v_S hold one entry per change, ranks and gamma one per segment."""
    name: str
    p: int
    T: int
    tau_rel: tuple
    ranks: tuple
    v_L: tuple
    v_S: tuple
    gamma: tuple
    noise_std: float = 0.1
    pattern: str = 'off_diagonal'
    sparse_magnitudes: tuple = None
    sigma_base: float = None
    description: str = ''

    def __post_init__(self):
        m = len(self.tau_rel)
        if len(self.ranks) != m + 1 or len(self.gamma) != m + 1:
            raise InvalidInputError(f"Scenario {self.name}: ranks and gamma need {m + 1} entries")
        if len(self.v_L) != m or len(self.v_S) != m:
            raise InvalidInputError(f"Scenario {self.name}: v_L and v_S need {m} entries")
        if self.sparse_magnitudes is not None and len(self.sparse_magnitudes) != m + 1:
            raise InvalidInputError(f"Scenario {self.name}: sparse_magnitudes need {m + 1} entries")
        if any(not 0 < rel < 1 for rel in self.tau_rel):
            raise InvalidInputError(f"Scenario {self.name}: relative change points must lie in (0, 1)")

    @property
    def change_points(self):
        return [int(round(rel * self.T)) for rel in self.tau_rel]

    def to_dict(self):
        return {
            'name': self.name, 'p': self.p, 'T': self.T, 'tau_rel': list(self.tau_rel),
            'ranks': list(self.ranks), 'v_L': list(self.v_L), 'v_S': list(self.v_S),
            'gamma': list(self.gamma), 'noise_std': self.noise_std, 'pattern': self.pattern,
        }


@dataclass
class MetricsReport:
    sensitivity: float = None
    specificity: float = None
    relative_errors: tuple = None
    hausdorff: float = None
    selection_rate: float = None
    snr: float = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ('sensitivity', 'specificity', 'selection_rate'):
            value = getattr(self, name)
            if value is not None and not 0 <= value <= 1:
                raise InvalidInputError(f"{name}={value} is outside [0, 1]")
        if self.relative_errors is not None and any(value < 0 for value in self.relative_errors):
            raise InvalidInputError("Relative errors must be nonnegative")

    def to_dict(self):
        payload = {
            'sensitivity': self.sensitivity,
            'specificity': self.specificity,
            'relative_errors': (
                dict(zip(('total', 'sparse', 'lowrank'), self.relative_errors))
                if self.relative_errors is not None else None
            ),
            'hausdorff': self.hausdorff,
            'selection_rate': self.selection_rate,
            'snr': self.snr,
        }
        payload.update(self.extra)
        return payload
