"""Domain types for piecewise low-rank plus sparse VAR(1) models."""
from dataclasses import dataclass, field

import numpy as np

from lsvar.exceptions import InvalidInputError, UnstableModelError

# Slack for floating-point clipping when checking membership in Omega.
OMEGA_SLACK = 1e-12


def _as_matrix(values, name):
    matrix = np.asarray(values, dtype=float)
    if matrix.ndim != 2:
        raise InvalidInputError(f"{name} must be a 2-D array, got shape {matrix.shape}")
    return matrix


@dataclass
class TimeSeriesData:
    """T x p observations; row t is X_t."""
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if values.ndim != 2:
            raise InvalidInputError(f"Observations must form a T x p matrix, got shape {values.shape}")
        if values.shape[0] < 2:
            raise InvalidInputError(f"Need at least 2 observations, got {values.shape[0]}")
        if values.shape[1] < 1:
            raise InvalidInputError("Need at least one series")
        if not np.all(np.isfinite(values)):
            row, col = np.argwhere(~np.isfinite(values))[0]
            raise InvalidInputError(f"Non-finite observation at row {row}, column {col}")
        self.values = values

    @property
    def T(self):
        return self.values.shape[0]

    @property
    def p(self):
        return self.values.shape[1]

    def window(self, start, stop):
        """Observations start..stop-1 as a new series."""
        return TimeSeriesData(self.values[start:stop], dict(self.metadata, offset=start))

    def reversed(self):
        return TimeSeriesData(self.values[::-1].copy(), dict(self.metadata, reversed=True))


@dataclass
class LowRankSparsePair:
    """Transition matrix A = L + S with L restricted to Omega."""
    L: np.ndarray
    S: np.ndarray
    alpha_L: float = np.inf

    def __post_init__(self):
        self.L = _as_matrix(self.L, 'L')
        self.S = _as_matrix(self.S, 'S')
        p = self.L.shape[0]
        if self.L.shape != (p, p) or self.S.shape != (p, p):
            raise InvalidInputError(
                f"L and S must be square and of equal shape, got {self.L.shape} and {self.S.shape}"
            )
        if self.alpha_L < 0:
            raise InvalidInputError(f"alpha_L must be nonnegative, got {self.alpha_L}")
        bound = self.alpha_L / p
        if np.max(np.abs(self.L), initial=0.0) > bound + OMEGA_SLACK:
            raise InvalidInputError(
                f"Low-rank component has entry {np.max(np.abs(self.L)):.4g} above alpha_L/p = {bound:.4g}"
            )

    @property
    def p(self):
        return self.L.shape[0]

    @property
    def transition(self):
        return self.L + self.S

    def rank(self, tol=1e-10):
        singular_values = np.linalg.svd(self.L, compute_uv=False)
        return int(np.sum(singular_values > tol))

    def density(self, threshold=0.0):
        """Number of entries of S above `threshold` in absolute value."""
        return int(np.sum(np.abs(self.S) > threshold))

    @property
    def spikiness(self):
        return float(self.p * np.max(np.abs(self.L), initial=0.0))

    def to_dict(self):
        return {'L': self.L.tolist(), 'S': self.S.tolist()}


@dataclass
class PiecewiseVarModel:
    change_points: list
    segments: list
    noise_std: float
    max_sparse_magnitude: float = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.change_points = [int(tau) for tau in self.change_points]
        if len(self.segments) != len(self.change_points) + 1:
            raise InvalidInputError(
                f"{len(self.change_points)} change points need {len(self.change_points) + 1} segments, "
                f"got {len(self.segments)}"
            )
        if any(tau <= 1 for tau in self.change_points):
            raise InvalidInputError(f"Change points must exceed 1, got {self.change_points}")
        if any(b <= a for a, b in zip(self.change_points, self.change_points[1:])):
            raise InvalidInputError(f"Change points must be strictly increasing, got {self.change_points}")
        if len({segment.p for segment in self.segments}) != 1:
            raise InvalidInputError("All segments must share the same dimension p")
        if self.noise_std < 0:
            raise InvalidInputError(f"noise_std must be nonnegative, got {self.noise_std}")
        largest = max(float(np.max(np.abs(s.S), initial=0.0)) for s in self.segments)
        if self.max_sparse_magnitude is None:
            self.max_sparse_magnitude = largest
        elif largest > self.max_sparse_magnitude + OMEGA_SLACK:
            raise InvalidInputError(
                f"Sparse entry {largest:.4g} exceeds max_sparse_magnitude {self.max_sparse_magnitude:.4g}"
            )
        self.validate_stability()

    def validate_stability(self):
        from var_model.utils import spectral_radius, STABILITY_MARGIN

        for index, segment in enumerate(self.segments):
            radius = spectral_radius(segment.transition)
            if radius >= 1 - STABILITY_MARGIN:
                raise UnstableModelError(
                    f"Segment {index} is not stable: spectral radius {radius:.6f} >= 1",
                    segment=index,
                    spectral_radius=radius,
                )

    @property
    def p(self):
        return self.segments[0].p

    @property
    def m0(self):
        return len(self.change_points)

    @property
    def alpha_L(self):
        return max(segment.alpha_L for segment in self.segments)

    def transitions(self):
        return [segment.transition for segment in self.segments]

    def jump_sizes(self, part='transition'):
        """Spectral-norm jumps between consecutive segments."""
        pick = {
            'transition': lambda s: s.transition,
            'sparse': lambda s: s.S,
            'lowrank': lambda s: s.L,
        }[part]
        return [
            float(np.linalg.norm(pick(right) - pick(left), 2))
            for left, right in zip(self.segments, self.segments[1:])
        ]

    def segment_index(self, t):
        """Segment governing response index t (t >= tau uses the right model)."""
        return int(np.searchsorted(self.change_points, t, side='right'))

    def to_dict(self):
        return {
            'p': self.p,
            'sigma': self.noise_std,
            'change_points': list(self.change_points),
            'segments': [segment.to_dict() for segment in self.segments],
            'alpha_L': self.alpha_L,
            'max_sparse_magnitude': self.max_sparse_magnitude,
            'metadata': self.metadata,
        }

    @classmethod
    def from_dict(cls, payload):
        try:
            alpha_L = float(payload.get('alpha_L', np.inf))
            segments = [
                LowRankSparsePair(np.array(item['L']), np.array(item['S']), alpha_L)
                for item in payload['segments']
            ]
            model = cls(
                change_points=payload['change_points'],
                segments=segments,
                noise_std=float(payload['sigma']),
                max_sparse_magnitude=payload.get('max_sparse_magnitude'),
                metadata=payload.get('metadata', {}),
            )
        except (KeyError, TypeError) as exc:
            raise InvalidInputError(f"Malformed model document: {exc}") from exc
        if 'p' in payload and int(payload['p']) != model.p:
            raise InvalidInputError(f"Declared p={payload['p']} does not match segments of size {model.p}")
        return model
