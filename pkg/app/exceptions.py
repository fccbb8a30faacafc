from typing import Optional, Tuple


class LandscapeError(Exception):
    """Base error for every failure raised by the toolkit."""

    exit_code: int = 3

    def __init__(self, message):
        super().__init__(message)
        self.message = message


class ConfigError(LandscapeError):
    """Raised when a run configuration fails schema validation."""

    exit_code = 2


class InvalidDomainError(LandscapeError):
    exit_code = 2


class InvalidPartitionError(LandscapeError):
    exit_code = 2


class DegenerateCubeError(LandscapeError):
    exit_code = 2


class IncompatiblePeriodError(LandscapeError):
    exit_code = 2


class InvalidPotentialError(LandscapeError):
    exit_code = 2


class TorusMismatchError(LandscapeError):
    exit_code = 2


class DimensionMismatchError(LandscapeError):
    exit_code = 2


class ParityError(LandscapeError):
    """Raised when an operation needs an even side length K."""

    exit_code = 2


class ParameterRangeError(LandscapeError):
    exit_code = 2


class ScaleError(LandscapeError):
    """Raised when a box side s(μ) or a cube side does not fit on the torus."""

    exit_code = 2

    def __init__(self, message, min_mu: Optional[float] = None):
        super().__init__(message)
        self.min_mu = min_mu


class WindowError(LandscapeError):
    exit_code = 2


class PreconditionError(LandscapeError):
    """Raised when an oracle input does not satisfy its hypothesis."""

    exit_code = 1

    def __init__(self, message, site: Optional[Tuple[int, ...]] = None):
        super().__init__(message)
        self.site = site


class SingularOperatorError(LandscapeError):
    exit_code = 3


class IterationLimitError(LandscapeError):
    exit_code = 3

    def __init__(self, message, residual: float):
        super().__init__(message)
        self.residual = residual


class PivotBreakdown(LandscapeError):
    """Raised internally when a shifted factorization hits a (near) zero pivot."""

    exit_code = 3


class ShiftDegeneracyError(LandscapeError):
    exit_code = 3


class FitError(LandscapeError):
    exit_code = 3


class KernelCapacityError(LandscapeError):
    exit_code = 3


class RealizationError(LandscapeError):
    exit_code = 3

    def __init__(self, message, index: int, seed: int):
        super().__init__(message)
        self.index = index
        self.seed = seed
