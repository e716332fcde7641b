"""Exception types shared across the package."""


class HamsyncError(Exception):
    """Base class for all library-specific errors."""


class NoPrimeError(HamsyncError):
    """An interval contained no prime after an exhaustive scan."""


class UncorrectableError(HamsyncError):
    """A decoder detected more errors than its budget allows."""


class WireFormatError(HamsyncError):
    """A serialized frame failed validation (magic, version, bounds, CRC)."""


class ParameterOverflowError(HamsyncError):
    """A derived field width exceeds the word budget of the wire format."""
