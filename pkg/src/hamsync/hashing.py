"""Hash-family constructions and the word-level MSB/PACK primitives.

Four builders are provided:
- a randomized 2-wise multiply-shift map into a quadratic range,
- a randomized 3-wise quadratic polynomial over a prime field,
- a deterministic multiply-shift search (identical on both parties),
- a deterministic bit-selection mask from sorted-neighbor XORs.

Each builder verifies injectivity on its build set, so randomized
constructions stay Las Vegas: a returned descriptor is always valid.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np


def msb(x: int) -> int:
    """Word with exactly the highest set bit of x."""
    if x <= 0:
        raise ValueError("undefined on zero")
    return 1 << (x.bit_length() - 1)


def pack(x: int, mask: int) -> int:
    """Bits of x at mask's set positions, compressed toward the low end.

    Ascending mask positions map to ascending output positions (so the
    descending-position concatenation lands right-aligned).
    """
    out = 0
    i = 0
    pos = 0
    m = mask
    while m:
        if m & 1:
            out |= ((x >> pos) & 1) << i
            i += 1
        pos += 1
        m >>= 1
    return out


_MSB_TABLE_CAP = 16
_PACK_TABLE_CAP = 12


class PackTables:
    """Four-russians lookup tables for chunked msb/pack simulation."""

    def __init__(self, chunk_bits: int):
        if chunk_bits < 1 or chunk_bits > _MSB_TABLE_CAP:
            raise ValueError("chunk too wide")
        self.chunk_bits = chunk_bits
        size = 1 << chunk_bits
        self.msb_table = np.zeros(size, dtype=np.uint32)
        for v in range(1, size):
            self.msb_table[v] = msb(v)
        # pack table indexed by (x << chunk_bits) | mask; only built when
        # the paired index fits a practical table size
        if chunk_bits <= _PACK_TABLE_CAP:
            pair = 1 << (2 * chunk_bits)
            self.pack_bits = np.zeros(pair, dtype=np.uint32)
            self.pack_count = np.zeros(pair, dtype=np.uint8)
            for xm in range(pair):
                x = xm >> chunk_bits
                m = xm & (size - 1)
                self.pack_bits[xm] = pack(x, m)
                self.pack_count[xm] = bin(m).count("1")
        else:
            self.pack_bits = None
            self.pack_count = None

    def msb_of(self, x: int, width: int) -> int:
        """msb(x) for x of up to `width` bits via chunked table lookups."""
        if x <= 0:
            raise ValueError("undefined on zero")
        c = self.chunk_bits
        nchunks = (width + c - 1) // c
        for j in range(nchunks - 1, -1, -1):
            chunk = (x >> (j * c)) & ((1 << c) - 1)
            if chunk:
                return int(self.msb_table[chunk]) << (j * c)
        raise ValueError("undefined on zero")

    def pack_of(self, x: int, mask: int, width: int) -> int:
        """pack(x, mask) for operands of up to `width` bits via tables."""
        if self.pack_bits is None:
            raise ValueError("chunk too wide")
        c = self.chunk_bits
        nchunks = (width + c - 1) // c
        out = 0
        shift = 0
        lim = (1 << c) - 1
        for j in range(nchunks):
            xm = (((x >> (j * c)) & lim) << c) | ((mask >> (j * c)) & lim)
            out |= int(self.pack_bits[xm]) << shift
            shift += int(self.pack_count[xm])
        return out


def build_pack_tables(chunk_bits: int) -> PackTables:
    return PackTables(chunk_bits)


# ---------------------------------------------------------------------------
# Randomized families

@dataclass(frozen=True)
class TwoWiseParams:
    """Multiply-shift map of r-bit keys into [2^s]: ((a*x+b) mod 2^2r) >> (2r-s).

    When s >= 2r the map degenerates to the identity (range covers the
    whole universe), encoded as a=1, b=0.
    """

    a: int
    b: int
    r: int
    s: int
    rounds: int = 1

    def eval_one(self, x: int) -> int:
        if self.s >= 2 * self.r:
            return x
        return ((self.a * x + self.b) & ((1 << (2 * self.r)) - 1)) >> (2 * self.r - self.s)

    def eval_many(self, xs) -> list[int]:
        return [self.eval_one(int(x)) for x in xs]


def build_g1(keys, r: int, rng: random.Random) -> TwoWiseParams:
    """Injective 2-wise multiply-shift from [2^r] into [4*nhat^2].

    nhat is |keys| rounded up to a power of two; resamples until the map
    is injective on keys (Las Vegas, expected O(1) rounds).
    """
    keys = sorted(int(x) for x in keys)
    n = len(keys)
    if len(set(keys)) != n:
        raise ValueError("keys must be distinct")
    if n == 0:
        return TwoWiseParams(1, 0, r, min(2, 2 * r), 1)
    nhat = 1 << max(n - 1, 0).bit_length() if n > 1 else 1
    s = 2 * nhat.bit_length() - 2 + 2  # 2*log2(nhat) + 2
    if s >= 2 * r:
        return TwoWiseParams(1, 0, r, s, 1)
    rounds = 0
    width = 1 << (2 * r)
    while True:
        rounds += 1
        a = rng.randrange(width) | 1
        b = rng.randrange(width)
        params = TwoWiseParams(a, b, r, s, rounds)
        if len({params.eval_one(x) for x in keys}) == n:
            return params


@dataclass(frozen=True)
class ThreeWiseParams:
    """Quadratic polynomial (a*y^2 + b*y + c) mod P over a prime field."""

    P: int
    a: int
    b: int
    c: int
    n: int
    rounds: int = 1

    def eval_one(self, y: int) -> int:
        return (self.a * y * y + self.b * y + self.c) % self.P

    def eval_many(self, ys: np.ndarray) -> np.ndarray:
        """Vectorized evaluation; falls back to Python ints for huge P."""
        ys = np.asarray(ys, dtype=np.uint64)
        if self.P < (1 << 37):
            P = np.uint64(self.P)
            ym = ys % P
            y2 = _mulmod_u64(ym, ym, self.P)
            t = _mulmod_u64(np.full_like(ym, self.a % self.P), y2, self.P)
            t = (t + _mulmod_u64(np.full_like(ym, self.b % self.P), ym, self.P)) % P
            return (t + np.uint64(self.c % self.P)) % P
        return np.array([self.eval_one(int(y)) for y in ys], dtype=object)


def _mulmod_u64(a: np.ndarray, b: np.ndarray, p: int) -> np.ndarray:
    """(a*b) mod p for arrays with a, b, p < 2^37, in uint64 arithmetic."""
    P = np.uint64(p)
    b_hi = b >> np.uint64(18)
    b_lo = b & np.uint64((1 << 18) - 1)
    hi = (a * b_hi) % P  # a < 2^37, b_hi < 2^19 -> product < 2^56
    return ((hi << np.uint64(18)) % P + (a * b_lo) % P) % P


def cube_sum_of_buckets(bucket_sizes: np.ndarray) -> int:
    sizes = np.asarray(bucket_sizes, dtype=np.int64)
    return int((sizes.astype(object) ** 3).sum()) if len(sizes) else 0


def build_g2(
    keys, P: int, n: int, alpha: int, rng: random.Random
) -> ThreeWiseParams:
    """3-wise quadratic over F_P with verified bucket conditions.

    Accepts coefficients only when (1) y -> f(y) mod n^2 is injective on
    keys and (2) the bucket sizes under f(y) mod n satisfy
    sum of cubes <= alpha * n.  Las Vegas.
    """
    keys = np.asarray(sorted(int(x) for x in keys), dtype=np.uint64)
    m = len(keys)
    if len(set(int(x) for x in keys)) != m:
        raise ValueError("keys must be distinct")
    if n == 0 or m == 0:
        return ThreeWiseParams(P, 0, 0, 0, n, 1)
    rounds = 0
    while True:
        rounds += 1
        a = rng.randrange(P)
        b = rng.randrange(P)
        c = rng.randrange(P)
        params = ThreeWiseParams(P, a, b, c, n, rounds)
        vals = params.eval_many(keys)
        if vals.dtype == object:  # huge-modulus fallback path
            mod_n2 = {int(v) % (n * n) for v in vals}
            if len(mod_n2) != m:
                continue
            sizes = np.bincount(
                np.array([int(v) % n for v in vals], dtype=np.int64), minlength=n
            )
        else:
            mod_n2 = np.asarray(vals, dtype=np.uint64) % np.uint64(n * n)
            if len(np.unique(mod_n2)) != m:
                continue
            buckets = np.asarray(vals, dtype=np.uint64) % np.uint64(n)
            sizes = np.bincount(buckets.astype(np.int64), minlength=n)
        if cube_sum_of_buckets(sizes) <= alpha * n:
            return params


# ---------------------------------------------------------------------------
# Deterministic families

@dataclass(frozen=True)
class DetMultShiftParams:
    """Deterministic multiply-shift ((x*a+b) mod 2^r) >> (r-s).

    When s >= r the identity is used (a=1, b=0): every r-bit key already
    fits the s-bit range.
    """

    a: int
    b: int
    r: int
    s: int

    def eval_one(self, x: int) -> int:
        if self.s >= self.r:
            return x
        return ((x * self.a + self.b) & ((1 << self.r) - 1)) >> (self.r - self.s)


def build_det_multshift(keys, r: int, s: int) -> DetMultShiftParams:
    """Smallest odd multiplier making the map injective on keys.

    Pure function of (keys, r, s): sender and receiver derive identical
    parameters from identical sets.  Terminates whenever
    |keys|^2 <= 2^{s-1} (the family's collision bound guarantees an odd
    multiplier with zero collisions exists).
    """
    keys = sorted(int(x) for x in keys)
    m = len(keys)
    if len(set(keys)) != m:
        raise ValueError("keys must be distinct")
    if m <= 1 or s >= r:
        return DetMultShiftParams(1, 0, r, s)
    mask = (1 << r) - 1
    shift = r - s
    for a in range(1, 1 << r, 2):
        seen = set()
        ok = True
        for x in keys:
            v = ((x * a) & mask) >> shift
            if v in seen:
                ok = False
                break
            seen.add(v)
        if ok:
            return DetMultShiftParams(a, 0, r, s)
    raise ValueError("no injective multiplier exists for this key set")


@dataclass(frozen=True)
class BitSelectParams:
    """Mask of distinguishing bit positions (MSBs of sorted-neighbor XORs)."""

    mask: int
    r: int

    @property
    def selected_bits(self) -> int:
        return bin(self.mask).count("1")

    def eval_one(self, x: int) -> int:
        return pack(x, self.mask)


def build_bitselect(keys, r: int) -> BitSelectParams:
    """Deterministic distinguishing mask with <= |keys|-1 set bits."""
    keys = sorted(int(x) for x in keys)
    m = len(keys)
    if len(set(keys)) != m:
        raise ValueError("keys must be distinct")
    mask = 0
    for i in range(m - 1):
        mask |= msb(keys[i] ^ keys[i + 1])
    params = BitSelectParams(mask, r)
    if len({params.eval_one(x) for x in keys}) != m:
        raise AssertionError("bit selection failed to separate keys")
    return params


# ---------------------------------------------------------------------------
# Per-bucket composite hash

@dataclass(frozen=True)
class BucketHashDescriptor:
    """Injective map of a bucket's key images into [4 * bhat^2].

    Large buckets (size > ceil(log2 n)) use one deterministic
    multiply-shift; small buckets first compress through a bit-selection
    mask, then multiply-shift the packed images.
    """

    kind: str  # "large" | "small"
    size: int
    bhat: int
    bitsel: BitSelectParams | None
    dms: DetMultShiftParams

    @property
    def cells(self) -> int:
        return 4 * self.bhat * self.bhat


def log2_ceil(x: int) -> int:
    """ceil(log2(max(x, 2))) — the log convention used throughout."""
    v = max(x, 2)
    return (v - 1).bit_length()


def build_bucket_hash(images, n: int, r_img: int) -> BucketHashDescriptor | None:
    """Deterministic injective hash for one bucket's key images.

    images: the bucket's distinct key images in [2^r_img]; returns None
    for an empty bucket.
    """
    images = sorted(int(x) for x in images)
    b = len(images)
    if b == 0:
        return None
    if len(set(images)) != b:
        raise ValueError("bucket images must be distinct")
    bhat = 1 << (b - 1).bit_length() if b > 1 else 1
    s = 2 * (bhat.bit_length() - 1) + 2
    threshold = log2_ceil(n)
    if b > threshold:
        dms = build_det_multshift(images, r_img, s)
        return BucketHashDescriptor("large", b, bhat, None, dms)
    bitsel = build_bitselect(images, r_img)
    packed = sorted(bitsel.eval_one(x) for x in images)
    dms = build_det_multshift(packed, bitsel.selected_bits, s)
    return BucketHashDescriptor("small", b, bhat, bitsel, dms)


def eval_bucket_hash(desc: BucketHashDescriptor | None, image: int) -> int:
    """Cell index in [4 * bhat^2] for one key image."""
    if desc is None:
        raise ValueError("null bucket")
    if desc.kind == "large":
        return desc.dms.eval_one(image)
    return desc.dms.eval_one(desc.bitsel.eval_one(image))
