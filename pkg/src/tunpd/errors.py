"""Exception hierarchy shared across the package."""


class TunError(Exception):
    """Base class for all package errors."""

    exit_code = 3


class InvalidInput(TunError, ValueError):
    exit_code = 2


class DegenerateInput(InvalidInput):
    pass


class InconsistentComplex(TunError):
    pass


class OracleTooLarge(TunError):
    pass


class ShapeError(TunError, ValueError):
    pass


class NonFiniteGradient(TunError, FloatingPointError):
    pass


class EmptyBatch(TunError, ValueError):
    pass


class IncompatibleCheckpoint(TunError):
    exit_code = 2


class GenerationFailed(TunError):
    pass
