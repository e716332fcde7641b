"""One-way reconciliation of sparse strings under Hamming distance.

A sender holding a sparse string emits a compact digest; a receiver
holding a nearby string (bounded Hamming distance) recovers the
sender's string exactly from the digest alone.
"""

from .errors import (
    HamsyncError,
    NoPrimeError,
    ParameterOverflowError,
    UncorrectableError,
    WireFormatError,
)

__version__ = "0.1.0"

__all__ = [
    "HamsyncError",
    "NoPrimeError",
    "ParameterOverflowError",
    "UncorrectableError",
    "WireFormatError",
    "__version__",
]
