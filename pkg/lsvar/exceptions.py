"""Error hierarchy shared by every lsvar app."""


class LsvarError(Exception):
    """Base error; `code` and `exit_status` are what the CLI reports."""

    code = 'lsvar_error'
    exit_status = 1

    def to_dict(self):
        return {
            'error': {
                'code': self.code,
                'message': str(self),
                'type': type(self).__name__,
            }
        }


class InvalidInputError(LsvarError, ValueError):
    code = 'invalid_input'
    exit_status = 2


class UnstableModelError(InvalidInputError):
    code = 'unstable_model'
    exit_status = 3

    def __init__(self, message, segment=None, spectral_radius=None):
        super().__init__(message)
        self.segment = segment
        self.spectral_radius = spectral_radius


class DegenerateIntervalError(InvalidInputError):
    code = 'degenerate_interval'
    exit_status = 4


class SolverDivergenceError(LsvarError):
    code = 'solver_divergence'
    exit_status = 5

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class DetectionError(LsvarError):
    code = 'detection_failed'
    exit_status = 6


class UndefinedMetricError(LsvarError, ArithmeticError):
    code = 'undefined_metric'
    exit_status = 7


class IngestionError(InvalidInputError):
    code = 'ingestion_failed'
    exit_status = 8

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class InternalError(LsvarError):
    """Unexpected failure inside a command, reported with the original exception type."""
    code = 'internal_error'
    exit_status = 9
