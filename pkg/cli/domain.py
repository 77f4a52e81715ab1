"""Validated configuration of one command-line run."""
from dataclasses import dataclass
from pathlib import Path

from estimation.domain import GRID_MAX, GRID_MIN
from estimation.utils import GRID_SIZE
from lsvar.exceptions import InvalidInputError
from multi_detect.utils import MIN_WINDOW
from surrogate.domain import DEFAULT_Q

COMMANDS = (
    'simulate', 'detect-single', 'detect-multi', 'detect-dp', 'detect-surrogate', 'detect-combined',
    'benchmark', 'evaluate',
)
MULTI_METHODS = ('two-step', 'dp', 'surrogate', 'combined')
BENCHMARK_METHODS = ('single', 'surrogate-single') + MULTI_METHODS

# detect-* aliases that pin the multiple change point method
METHOD_ALIASES = {
    'detect-dp': 'dp',
    'detect-surrogate': 'surrogate',
    'detect-combined': 'combined',
}

NEEDS_INPUT = ('detect-single', 'detect-multi', 'detect-dp', 'detect-surrogate', 'detect-combined', 'evaluate')
NEEDS_SCENARIO = ('simulate', 'benchmark')


@dataclass
class RunConfig:
    command: str
    output_dir: Path
    input_path: Path = None
    model_path: Path = None
    scenario: str = None
    method: str = 'two-step'
    window_size: int = None
    shift: int = None
    omega: float = None
    gamma: float = None
    q: float = DEFAULT_Q
    alpha_c: float = None
    seed: int = 0
    detrend_period: int = None
    stride: int = 1
    replicates: int = None
    refine: bool = False
    tune: bool = False
    grid_min: float = GRID_MIN
    grid_max: float = GRID_MAX
    grid_size: int = GRID_SIZE

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InvalidInputError(f"Unknown command {self.command!r}; choose one of {', '.join(COMMANDS)}")
        self.method = METHOD_ALIASES.get(self.command, self.method)
        self.output_dir = Path(self.output_dir)
        if self.input_path is not None:
            self.input_path = Path(self.input_path)
        if self.model_path is not None:
            self.model_path = Path(self.model_path)
        self._check_paths()
        self._check_ranges()

    def _check_paths(self):
        if self.command in NEEDS_INPUT:
            if self.input_path is None:
                raise InvalidInputError(f"{self.command} needs --input")
            if not self.input_path.is_file():
                raise InvalidInputError(f"Input file {self.input_path} does not exist")
        if self.command == 'evaluate':
            if self.model_path is None:
                raise InvalidInputError("evaluate needs --model")
            if not self.model_path.is_file():
                raise InvalidInputError(f"Model file {self.model_path} does not exist")
        if self.command in NEEDS_SCENARIO and not self.scenario:
            raise InvalidInputError(f"{self.command} needs --scenario")
        if self.output_dir.exists() and not self.output_dir.is_dir():
            raise InvalidInputError(f"Output path {self.output_dir} is not a directory")

    def _check_ranges(self):
        allowed = BENCHMARK_METHODS if self.command == 'benchmark' else MULTI_METHODS
        if self.method not in allowed:
            raise InvalidInputError(f"Method {self.method!r} is not available for {self.command}")
        if self.window_size is not None and self.window_size < MIN_WINDOW:
            raise InvalidInputError(f"--window-size must be >= {MIN_WINDOW}, got {self.window_size}")
        if self.shift is not None and self.shift < 1:
            raise InvalidInputError(f"--shift must be >= 1, got {self.shift}")
        for name in ('omega', 'gamma'):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise InvalidInputError(f"--{name} must be nonnegative, got {value}")
        if not 0 < self.q < 1:
            raise InvalidInputError(f"--q must lie in (0, 1), got {self.q}")
        if self.alpha_c is not None and not self.alpha_c > 0:
            raise InvalidInputError(f"--alpha-c must be positive, got {self.alpha_c}")
        if self.detrend_period is not None and self.detrend_period < 1:
            raise InvalidInputError(f"--detrend-period must be >= 1, got {self.detrend_period}")
        if self.stride < 1:
            raise InvalidInputError(f"--stride must be >= 1, got {self.stride}")
        if self.replicates is not None and self.replicates < 1:
            raise InvalidInputError(f"--replicates must be >= 1, got {self.replicates}")
        if not GRID_MIN <= self.grid_min < self.grid_max <= GRID_MAX:
            raise InvalidInputError(
                f"Grid bounds must satisfy {GRID_MIN} <= min < max <= {GRID_MAX}, got [{self.grid_min}, {self.grid_max}]"
            )
        if self.grid_size < 2:
            raise InvalidInputError(f"--grid-size must be >= 2, got {self.grid_size}")

    def method_options(self):
        """Options understood by evaluation.utils.detect_replicate."""
        options = {
            'h': self.window_size, 'l': self.shift, 'omega': self.omega, 'gamma': self.gamma,
            'alpha_c': self.alpha_c, 'q': self.q, 'refine': self.refine,
        }
        return {key: value for key, value in options.items() if value is not None}

    def to_dict(self):
        return {
            'command': self.command,
            'input': str(self.input_path) if self.input_path else None,
            'scenario': self.scenario,
            'method': self.method,
            'window_size': self.window_size,
            'shift': self.shift,
            'omega': self.omega,
            'gamma': self.gamma,
            'q': self.q,
            'alpha_c': self.alpha_c,
            'seed': self.seed,
            'detrend_period': self.detrend_period,
            'stride': self.stride,
            'refine': self.refine,
            'tune': self.tune,
        }
