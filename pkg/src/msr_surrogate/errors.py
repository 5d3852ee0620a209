"""Exception hierarchy. The CLI maps these onto process exit codes."""


class SurrogateError(Exception):
    """Base class for all package errors."""


class DataError(SurrogateError):
    """Malformed input data, CSV schema violations, bad model files."""


class NumericalError(SurrogateError):
    """A numerical procedure failed (non-convergence, non-finite values)."""


class TemperatureRangeError(SurrogateError, ValueError):
    """Temperature outside the validity range of the thermochemical table."""


class InvariantError(NumericalError, ValueError):
    """A physical invariant (e.g. non-negative species amounts) was violated."""


class ModelInconsistencyError(NumericalError):
    """A closed-form model relation has no admissible solution."""


class ConvergenceError(NumericalError):
    def __init__(self, message, best_residual=float("nan")):
        super().__init__(message)
        self.best_residual = best_residual
