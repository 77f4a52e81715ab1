"""Window plans, candidate sets and multiple change point results."""
from dataclasses import dataclass, field

from django.conf import settings


@dataclass
class WindowPlan:
    h: int
    l: int
    windows: list

    def covers(self, T):
        """True when every response index in [1, T) falls in some window."""
        covered = set()
        for b, e in self.windows:
            covered.update(range(b, e))
        return covered >= set(range(1, T))

    def to_dict(self):
        return {'h': self.h, 'l': self.l, 'windows': [list(window) for window in self.windows]}


@dataclass
class Candidate:
    tau: int
    window: tuple
    objective: float


@dataclass
class CandidateSet:
    entries: list = field(default_factory=list)
    curves: dict = field(default_factory=dict, repr=False)

    @property
    def candidates(self):
        return [entry.tau for entry in self.entries]

    def __len__(self):
        return len(self.entries)

    def to_dict(self):
        return [
            {'tau': entry.tau, 'window': list(entry.window), 'objective': entry.objective}
            for entry in self.entries
        ]


@dataclass
class ScreeningTrace:
    ic_values: list = field(default_factory=list)
    omega_T: float = 0.0
    removed: list = field(default_factory=list)

    def to_dict(self):
        return {
            'omega_T': self.omega_T,
            'removed': list(self.removed),
            'steps': [{'retained': list(retained), 'ic': value} for retained, value in self.ic_values],
        }


@dataclass
class MultiDetection:
    change_points: list
    segment_fits: list
    trace: ScreeningTrace = field(default_factory=ScreeningTrace)
    method: str = 'two-step'
    window_plan: WindowPlan = None
    candidates: CandidateSet = None
    extra: dict = field(default_factory=dict)

    @property
    def m_hat(self):
        return len(self.change_points)

    def segments(self, T):
        bounds = [1] + list(self.change_points) + [T]
        return list(zip(bounds, bounds[1:]))

    def to_dict(self, T, rank_threshold=None, support_threshold=None):
        from estimation.utils import estimate_rank, sparse_support_size

        if rank_threshold is None:
            rank_threshold = settings.LSVAR_RANK_THRESHOLD
        if support_threshold is None:
            support_threshold = settings.LSVAR_SUPPORT_THRESHOLD
        per_segment = []
        for (start, stop), fit in zip(self.segments(T), self.segment_fits):
            per_segment.append({
                'interval': [start, stop],
                'rank_estimate': estimate_rank(fit.L_hat, rank_threshold),
                'sparse_support_size': sparse_support_size(fit.S_hat, support_threshold),
                'relative_objective': fit.rss / max(fit.n_pairs, 1),
            })
        payload = {
            'method': self.method,
            'change_points': list(self.change_points),
            'm_hat': self.m_hat,
            'window_plan': self.window_plan.to_dict() if self.window_plan else None,
            'omega_T': self.trace.omega_T,
            'per_segment': per_segment,
            'trace': self.trace.to_dict(),
            'candidates': self.candidates.to_dict() if self.candidates else [],
        }
        payload.update(self.extra)
        return payload
