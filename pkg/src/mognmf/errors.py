"""Exception hierarchy shared by all mognmf modules."""


class UnmixingError(Exception):
    """Base class for every error raised by this package."""


class ParseError(UnmixingError):
    """A file header or body does not match the documented format."""


class DataError(UnmixingError):
    """Data values violate an invariant (negative, NaN, all-zero band, ...)."""


class ParamError(UnmixingError):
    """A scalar parameter is outside its valid range."""


class ShapeError(UnmixingError):
    """Matrix dimensions are inconsistent with each other."""


class IoError(UnmixingError):
    """Reading or writing an artifact file failed."""


class InitError(UnmixingError):
    """Endmember/abundance initialization is infeasible for this data."""


class MetricError(UnmixingError):
    """A metric is undefined for the given inputs (e.g. zero spectrum)."""


class DivergenceError(UnmixingError):
    """The solver produced a non-finite objective value."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration
