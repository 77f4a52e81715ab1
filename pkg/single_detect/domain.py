"""Search domain and single change point result."""
from dataclasses import dataclass, field

from lsvar.exceptions import InvalidInputError


@dataclass(frozen=True)
class SearchDomain:
    lower: int
    upper: int

    def __post_init__(self):
        if self.lower < 1 or self.upper <= self.lower:
            raise InvalidInputError(f"Search domain [{self.lower}, {self.upper}] needs 1 <= a < b")

    def taus(self):
        return range(self.lower, self.upper + 1)

    def check_fits(self, T):
        if self.upper > T - 1:
            raise InvalidInputError(f"Search domain upper bound {self.upper} exceeds T - 1 = {T - 1}")


@dataclass
class SingleDetection:
    tau_hat: int
    objective_curve: list
    left_fit: object
    right_fit: object
    skipped: list = field(default_factory=list)
    method: str = 'lowrank_sparse'

    @property
    def minimum(self):
        return min(value for _, value in self.objective_curve)

    def to_dict(self):
        return {
            'method': self.method,
            'tau_hat': self.tau_hat,
            'objective_minimum': self.minimum,
            'curve_length': len(self.objective_curve),
            'skipped': list(self.skipped),
            'left_fit': self.left_fit.to_dict(),
            'right_fit': self.right_fit.to_dict(),
        }
