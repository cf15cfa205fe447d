"""Exception types shared across the package."""


class PixHomError(Exception):
    """Base class for all package errors."""


class FormatError(PixHomError, ValueError):
    """Malformed PXH header or diagram CSV."""


class TruncationError(FormatError):
    """PXH payload shorter than the header promises."""


class DataError(PixHomError, ValueError):
    """Non-finite pixel values."""


class BoundsError(PixHomError, IndexError):
    pass


class PreconditionError(PixHomError, ValueError):
    """Input violates an algorithm precondition (plateaus, duplicate values, cycles)."""


class ConsistencyError(PixHomError, RuntimeError):
    pass


class ConventionError(PixHomError, ValueError):
    """Persistence diagrams use different sign conventions."""


class SchedulingError(PixHomError, ValueError):
    pass


class SizeError(PixHomError, ValueError):
    pass
