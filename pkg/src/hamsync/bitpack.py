"""Fixed-width wide-symbol arrays and bit-level symbol packing.

A WideArray stores N symbols of a common bit width as 64-bit limb
columns, so fixed-width chunk slices can be extracted and deposited
with vectorized shifts instead of per-element Python loops.
"""

from __future__ import annotations

import numpy as np

_U64 = np.uint64
_LIMB_BITS = 64


class WideArray:
    """N symbols of `bits` bits each, as a (limb_count, N) uint64 matrix.

    Limb 0 holds the least significant 64 bits of every symbol.
    """

    def __init__(self, bits: int, limbs: np.ndarray):
        if bits < 1:
            raise ValueError("symbol width must be positive")
        expected = (bits + _LIMB_BITS - 1) // _LIMB_BITS
        if limbs.ndim != 2 or limbs.shape[0] != expected:
            raise ValueError("limb matrix shape does not match symbol width")
        self.bits = bits
        self.limbs = limbs.astype(_U64, copy=False)

    @classmethod
    def zeros(cls, count: int, bits: int) -> "WideArray":
        nlimbs = (max(bits, 1) + _LIMB_BITS - 1) // _LIMB_BITS
        return cls(bits, np.zeros((nlimbs, count), dtype=_U64))

    @classmethod
    def from_ints(cls, values, bits: int) -> "WideArray":
        out = cls.zeros(len(values), bits)
        for i, v in enumerate(values):
            out.set_int(i, v)
        return out

    def __len__(self) -> int:
        return self.limbs.shape[1]

    def copy(self) -> "WideArray":
        return WideArray(self.bits, self.limbs.copy())

    def __eq__(self, other) -> bool:
        if not isinstance(other, WideArray):
            return NotImplemented
        return self.bits == other.bits and np.array_equal(self.limbs, other.limbs)

    def get_int(self, i: int) -> int:
        v = 0
        for l in range(self.limbs.shape[0] - 1, -1, -1):
            v = (v << _LIMB_BITS) | int(self.limbs[l, i])
        return v

    def set_int(self, i: int, value: int) -> None:
        if value < 0 or value >> self.bits:
            raise ValueError(f"value out of range for {self.bits}-bit symbol")
        for l in range(self.limbs.shape[0]):
            self.limbs[l, i] = (value >> (l * _LIMB_BITS)) & 0xFFFFFFFFFFFFFFFF

    def to_ints(self) -> list[int]:
        return [self.get_int(i) for i in range(len(self))]

    def nonzero_mask(self) -> np.ndarray:
        """Boolean mask of symbols with any bit set."""
        return (self.limbs != 0).any(axis=0)

    def extract_chunk(self, bit_lo: int, width: int) -> np.ndarray:
        """Bits [bit_lo, bit_lo + width) of every symbol, as uint64."""
        if not 1 <= width <= _LIMB_BITS:
            raise ValueError("chunk width must be in [1, 64]")
        l = bit_lo // _LIMB_BITS
        off = bit_lo % _LIMB_BITS
        out = self.limbs[l] >> _U64(off)
        if off and off + width > _LIMB_BITS and l + 1 < self.limbs.shape[0]:
            out = out | (self.limbs[l + 1] << _U64(_LIMB_BITS - off))
        if width < _LIMB_BITS:
            out = out & _U64((1 << width) - 1)
        return out

    def deposit_chunk(self, bit_lo: int, width: int, values: np.ndarray) -> None:
        """OR the low `width` bits of values into bits [bit_lo, ...).

        Target bits are assumed to be zero (freshly allocated array).
        """
        if not 1 <= width <= _LIMB_BITS:
            raise ValueError("chunk width must be in [1, 64]")
        vals = values.astype(_U64, copy=False)
        if width < _LIMB_BITS:
            vals = vals & _U64((1 << width) - 1)
        l = bit_lo // _LIMB_BITS
        off = bit_lo % _LIMB_BITS
        self.limbs[l] |= vals << _U64(off)
        if off and off + width > _LIMB_BITS and l + 1 < self.limbs.shape[0]:
            self.limbs[l + 1] |= vals >> _U64(_LIMB_BITS - off)


def pack_symbols(values: np.ndarray, m: int) -> bytes:
    """Pack symbols of m bits each into bytes, little-endian bit order."""
    vals = np.asarray(values, dtype=_U64)
    if m < 1 or m > 64:
        raise ValueError("symbol width must be in [1, 64]")
    if len(vals) == 0:
        return b""
    shifts = np.arange(m, dtype=_U64)
    bits = ((vals[:, None] >> shifts) & _U64(1)).astype(np.uint8)
    return np.packbits(bits.reshape(-1), bitorder="little").tobytes()


def unpack_symbols(data: bytes, m: int, count: int) -> np.ndarray:
    """Inverse of pack_symbols; reads `count` symbols of m bits."""
    if m < 1 or m > 64:
        raise ValueError("symbol width must be in [1, 64]")
    if count == 0:
        return np.zeros(0, dtype=_U64)
    total = count * m
    if len(data) * 8 < total:
        raise ValueError("byte buffer too short for requested symbols")
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")
    bits = bits[:total].reshape(count, m).astype(_U64)
    weights = _U64(1) << np.arange(m, dtype=_U64)
    return (bits * weights).sum(axis=1, dtype=_U64)
