"""Memoized per-segment fits used by screening and dynamic programming."""
import logging

from estimation.domain import PenaltyConfig, SolverOptions
from estimation.utils import fit_lowrank_sparse, interval_tuning, segment_phase_tuning
from lsvar.exceptions import DegenerateIntervalError

logger = logging.getLogger(__name__)


class SegmentCost:
    """Fits on response ranges [start, stop), cached by range."""

    label = 'segment'

    def __init__(self, data, opts=None):
        self.data = data
        self.opts = opts or SolverOptions()
        self._fits = {}

    def _fit(self, start, stop):
        raise NotImplementedError

    def final_fit(self, start, stop):
        return self.fit(start, stop)

    def fit(self, start, stop):
        key = (start, stop)
        if key not in self._fits:
            if stop - start < 2:
                raise DegenerateIntervalError(
                    f"{self.label} segment [{start}, {stop}) has {stop - start} transition pairs; "
                    "at least 2 are needed"
                )
            logger.debug(f"{self.label} fit on [{start}, {stop})")
            self._fits[key] = self._fit(start, stop)
        return self._fits[key]

    def cost(self, start, stop):
        """Residual sum plus penalty terms of the segment fit."""
        return self.fit(start, stop).penalized_cost

    def residual(self, start, stop):
        return self.fit(start, stop).rss

    def objective(self, breakpoints):
        """Sum of segment costs for the partition of [1, T) at `breakpoints`."""
        bounds = [1] + sorted(breakpoints) + [self.data.T]
        return sum(self.cost(start, stop) for start, stop in zip(bounds, bounds[1:]))


class LowRankSparseCost(SegmentCost):
    label = 'lowrank_sparse'

    def __init__(self, data, penalty=None, opts=None):
        super().__init__(data, opts)
        self.penalty = penalty or PenaltyConfig()

    def weights(self, n):
        return interval_tuning(n, self.data.p, self.penalty.c0, self.penalty.c0_prime)

    def _fit(self, start, stop):
        lambda_, mu = self.weights(stop - start)
        return fit_lowrank_sparse(self.data, (start - 1, stop), self.penalty.with_weights(lambda_, mu), self.opts)

    def final_fit(self, start, stop):
        """Segment-phase refit when alpha_L is finite, otherwise the screening fit."""
        if stop - start < 2 or self.penalty.alpha_L == float('inf'):
            return self.fit(start, stop)
        lambda_j, mu_j = segment_phase_tuning(stop - start, self.data.p, self.penalty.alpha_L, self.penalty)
        return fit_lowrank_sparse(
            self.data, (start - 1, stop), self.penalty.with_weights(lambda_j, mu_j), self.opts
        )


class FixedWeightsCost(LowRankSparseCost):
    """Explicit (lambda, mu) per segment, looked up by segment position."""

    def __init__(self, data, penalties, bounds, penalty=None, opts=None):
        super().__init__(data, penalty, opts)
        self._weights = dict(zip(zip(bounds, bounds[1:]), penalties))

    def _fit(self, start, stop):
        lambda_, mu = self._weights[(start, stop)]
        return fit_lowrank_sparse(self.data, (start - 1, stop), self.penalty.with_weights(lambda_, mu), self.opts)
