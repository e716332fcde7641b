"""Two-level hashed digest of a sparse string: arrays b, B and beta.

The sender hashes its n keys into n buckets with a verified top-level
hash f (f1 = f mod n picks the bucket), then gives each bucket a
deterministic injective second-level hash into a quadratically sized
cell range.  Three arrays describe the result:

- b[i]: bucket sizes,
- B[i]: fixed-width second-level hash descriptors,
- beta[j]: cell records encoding (position, value) per key.

The receiver rebuilds all three from its own string using the same
deterministic builders, so the arrays differ from the sender's in at
most as many entries as the two strings differ in — which is what lets
systematic error correction transfer them.

Two top-hash variants exist.  The large-universe variant composes a
2-wise multiply-shift with a quadratic polynomial over a prime field
and stores full positions in cells.  The small-universe variant (when
u <= n^1.5) evaluates one quadratic over the extension field F_{q^2}
and stores only the quotient f(x) div n plus one root-selector bit;
the bucket index supplies the remainder, and the receiver recovers the
position by solving the quadratic.
"""

from __future__ import annotations

import math
import os
import random
from dataclasses import dataclass, field

import numpy as np

from .bitpack import WideArray
from .errors import HamsyncError, ParameterOverflowError
from .fields import (
    TABLE_LIMIT,
    PrimeField,
    QuadExtField,
    find_prime_in,
    next_prime_at_least,
)
from .hashing import (
    BucketHashDescriptor,
    ThreeWiseParams,
    TwoWiseParams,
    build_bucket_hash,
    build_g1,
    build_g2,
    cube_sum_of_buckets,
    eval_bucket_hash,
    log2_ceil,
    msb,
    pack,
)

DEFAULT_ALPHA = 32

_U64 = np.uint64


def default_alpha() -> int:
    """Cube-sum slack constant; overridable via HAMSYNC_ALPHA."""
    return int(os.environ.get("HAMSYNC_ALPHA", DEFAULT_ALPHA))


# ---------------------------------------------------------------------------
# input strings

@dataclass
class SparseString:
    """A length-u string over [sigma] given as its non-zero pairs."""

    u: int
    sigma: int
    pairs: list[tuple[int, int]]

    @property
    def n(self) -> int:
        return len(self.pairs)

    def validate(self) -> None:
        if self.u < 1 or self.sigma < 2:
            raise ValueError("need u >= 1 and sigma >= 2")
        seen = set()
        for x, c in self.pairs:
            if not 0 <= x < self.u:
                raise ValueError(f"position {x} out of range")
            if not 1 <= c < self.sigma:
                raise ValueError(f"value {c} out of range (zero means absent)")
            if x in seen:
                raise ValueError(f"duplicate position {x}")
            seen.add(x)

    def as_dict(self) -> dict[int, int]:
        return dict(self.pairs)

    def same_string(self, other: "SparseString") -> bool:
        return (
            self.u == other.u
            and self.sigma == other.sigma
            and self.as_dict() == other.as_dict()
        )


def hamming_distance(a: SparseString, b: SparseString) -> int:
    """Dense Hamming distance between the two underlying strings."""
    da, db = a.as_dict(), b.as_dict()
    d = sum(1 for x, c in da.items() if db.get(x, 0) != c)
    d += sum(1 for x in db if x not in da)
    return d


# ---------------------------------------------------------------------------
# parameters and layout

def round_universe(u: int) -> tuple[int, int]:
    """(u_round, log2(u_round)) with u_round the next power of two >= u."""
    if u < 1:
        raise ValueError("universe must be non-empty")
    log = (u - 1).bit_length()
    return 1 << log, log


def use_small_variant(u_round: int, n: int) -> bool:
    """Quotiented small-universe path iff u_round <= n^{3/2}."""
    return u_round * u_round <= n**3


@dataclass(frozen=True)
class TopHashDescriptor:
    """Fully explicit parameters of the first-level hash f."""

    variant: str  # "large" | "small"
    u: int
    u_round_log: int
    n: int
    # large-universe: f = g2(g1(x))
    g1: TwoWiseParams | None = None
    g2: ThreeWiseParams | None = None
    # small-universe: f = int(a*X^2 + b*X + c) over F_{q^2}
    q: int | None = None
    A: int | None = None
    a: tuple[int, int] | None = None
    b: tuple[int, int] | None = None
    c: tuple[int, int] | None = None
    rounds: int = 1  # builder resampling rounds (not serialized)

    @property
    def u_round(self) -> int:
        return 1 << self.u_round_log


@dataclass(frozen=True)
class Layout:
    """All fixed symbol widths derived from the problem parameters."""

    variant: str
    n: int
    u_round_log: int
    sigma_bits: int
    r_img: int  # bit width of bucket-hash input images
    w2: int  # width of the second descriptor field
    w_b: int  # bucket-size symbol width
    w_beta: int  # cell record width
    f2_bits: int = 0  # quotient width (small variant only)

    @property
    def w_B(self) -> int:
        return 2 + self.r_img + self.w2

    @property
    def x_bits(self) -> int:
        return max(self.u_round_log, 1)

    @property
    def null_B(self) -> int:
        return (1 << self.w_B) - 1


def compute_layout(top: TopHashDescriptor, sigma: int) -> Layout:
    n = top.n
    sigma_bits = max((sigma - 1).bit_length(), 1)
    if top.variant == "large":
        r_img = max((n * n - 1).bit_length(), 1) if n else 1
        if r_img > 63:
            raise ParameterOverflowError("bucket image width exceeds 63 bits")
        w2 = min(r_img, max(log2_ceil(n), 1))
        w_b = max(n.bit_length(), 1)
        u_round_log = top.u_round_log
        w_beta = 1 + max(u_round_log, 1) + sigma_bits
        return Layout("large", n, u_round_log, sigma_bits, r_img, w2, w_b, w_beta)
    q = top.q
    f2max = (q * q - 1) // n if n else 0
    f2_bits = max(f2max.bit_length(), 1)
    r_img = f2_bits + 1
    if r_img > 63:
        raise ParameterOverflowError("bucket image width exceeds 63 bits")
    w2 = min(r_img, max(log2_ceil(n), 1))
    w_b = max(min(n, 2 * (f2max + 1)).bit_length(), 1)
    w_beta = 2 + f2_bits + sigma_bits
    return Layout(
        "small", n, top.u_round_log, sigma_bits, r_img, w2, w_b, w_beta, f2_bits
    )


# ---------------------------------------------------------------------------
# top-hash construction and evaluation

def build_top_hash(
    keys, u: int, n: int, rng: random.Random, alpha: int | None = None
) -> TopHashDescriptor:
    """Verified Las Vegas top-level hash over the key set."""
    if alpha is None:
        alpha = default_alpha()
    u_round, u_round_log = round_universe(u)
    keys = sorted(int(x) for x in keys)
    if use_small_variant(u_round, n):
        return _build_top_small(keys, u, u_round, u_round_log, n, rng, alpha)
    nhat = 1 << (n - 1).bit_length() if n > 1 else 1
    g1 = build_g1(keys, u_round_log, rng)
    P = find_prime_in(4 * nhat * nhat, 8 * nhat * nhat - 1, rng)
    images = sorted(set(g1.eval_many(keys)))
    g2 = build_g2(images, P, n, alpha, rng)
    return TopHashDescriptor(
        "large", u, u_round_log, n, g1=g1, g2=g2, rounds=g1.rounds + g2.rounds
    )


def _build_top_small(keys, u, u_round, u_round_log, n, rng, alpha):
    q = next_prime_at_least(max(3, math.isqrt(max(u_round - 1, 0)) + 1))
    base = PrimeField(q)
    ext = QuadExtField(base)
    q2 = q * q
    keys_arr = np.asarray(keys, dtype=_U64)
    rounds = 0
    while True:
        rounds += 1
        a = rng.randrange(1, q2)
        b = rng.randrange(q2)
        c = rng.randrange(q2)
        top = TopHashDescriptor(
            "small", u, u_round_log, n,
            q=q, A=ext.A,
            a=(a // q, a % q), b=(b // q, b % q), c=(c // q, c % q),
            rounds=rounds,
        )
        if n == 0:
            return top
        f = _eval_f_small(top, keys_arr)
        sizes = np.bincount((f % n).astype(np.int64), minlength=n)
        if cube_sum_of_buckets(sizes) <= alpha * n:
            return top


def _mulshift_wide(xs: np.ndarray, a: int, b: int, tot_bits: int, s: int) -> np.ndarray:
    """((a*x + b) mod 2^tot_bits) >> (tot_bits - s), vectorized.

    Uses 32-bit limb arithmetic so the multiplier may exceed 64 bits.
    Requires s <= 64.
    """
    if s >= tot_bits:
        return xs.copy()
    if tot_bits <= 64:
        mask = _U64((1 << tot_bits) - 1) if tot_bits < 64 else _U64(0xFFFFFFFFFFFFFFFF)
        v = (_U64(a & 0xFFFFFFFFFFFFFFFF) * xs + _U64(b & 0xFFFFFFFFFFFFFFFF)) & mask
        return v >> _U64(tot_bits - s)
    nlimbs = (tot_bits + 31) // 32
    lim = (1 << 32) - 1
    a_limbs = [(a >> (32 * i)) & lim for i in range(nlimbs)]
    b_limbs = [(b >> (32 * i)) & lim for i in range(nlimbs)]
    x_lo = xs & _U64(lim)
    x_hi = xs >> _U64(32)
    x_limbs = [x_lo, x_hi]
    res = []
    carry = np.zeros_like(xs)
    lim64 = _U64(lim)
    for cidx in range(nlimbs):
        acc = carry + _U64(b_limbs[cidx])
        for i, ai in enumerate(a_limbs[: cidx + 1]):
            j = cidx - i
            if j < 2 and ai:
                p = _U64(ai) * x_limbs[j]
                acc = acc + (p & lim64)
        for i, ai in enumerate(a_limbs[:cidx]):
            j = cidx - 1 - i
            if j < 2 and ai:
                p = _U64(ai) * x_limbs[j]
                acc = acc + (p >> _U64(32))
        res.append(acc & lim64)
        carry = acc >> _U64(32)
    # assemble bits [tot_bits - s, tot_bits)
    lo_bit = tot_bits - s
    kidx = lo_bit // 32
    off = lo_bit % 32
    out = res[kidx] >> _U64(off)
    shift = 32 - off
    idx = kidx + 1
    while shift < s and idx < nlimbs:
        out = out | (res[idx] << _U64(shift))
        shift += 32
        idx += 1
    return out & _U64((1 << s) - 1)


def _eval_f_small(top: TopHashDescriptor, xs: np.ndarray) -> np.ndarray:
    """f(x) = int(a*X^2 + b*X + c) over F_{q^2}, vectorized for moderate q."""
    q = top.q
    if q >= (1 << 31):
        ext = QuadExtField(PrimeField(q), top.A)
        out = []
        for x in xs:
            X = ext.of_int(int(x))
            v = ext.add(ext.add(ext.mul(top.a, ext.mul(X, X)), ext.mul(top.b, X)), top.c)
            out.append(ext.to_int(v))
        return np.array(out, dtype=object)
    Q = _U64(q)
    A = _U64(top.A)
    x1 = xs // Q
    x0 = xs % Q
    # X^2
    s_hi = (_U64(2) * ((x1 * x0) % Q)) % Q
    s_lo = ((x0 * x0) % Q + (A * ((x1 * x1) % Q)) % Q) % Q
    ah, al = (_U64(v) for v in top.a)
    bh, bl = (_U64(v) for v in top.b)
    ch, cl = (_U64(v) for v in top.c)
    # a * X^2
    t_hi = ((ah * s_lo) % Q + (al * s_hi) % Q) % Q
    t_lo = ((al * s_lo) % Q + (A * ((ah * s_hi) % Q)) % Q) % Q
    # + b * X
    t_hi = (t_hi + ((bh * x0) % Q + (bl * x1) % Q) % Q) % Q
    t_lo = (t_lo + ((bl * x0) % Q + (A * ((bh * x1) % Q)) % Q) % Q) % Q
    # + c
    t_hi = (t_hi + ch) % Q
    t_lo = (t_lo + cl) % Q
    return t_hi * Q + t_lo


@dataclass
class KeyedImages:
    """One party's keys evaluated through the top hash."""

    positions: np.ndarray  # uint64
    values: np.ndarray  # uint64
    f1: np.ndarray  # int64 bucket indices
    img: np.ndarray  # uint64 bucket-hash input images
    f2: np.ndarray | None = None  # uint64 quotients (small variant)
    ibit: np.ndarray | None = None  # uint8 root-selector bits (small variant)


def evaluate_keys(top: TopHashDescriptor, positions, values=None) -> KeyedImages:
    """Bucket indices and second-level images for a set of positions."""
    pos = np.asarray(positions, dtype=_U64)
    vals = (
        np.asarray(values, dtype=_U64)
        if values is not None
        else np.zeros(len(pos), dtype=_U64)
    )
    n = top.n
    if n == 0:
        raise ValueError("degenerate digest has no buckets")
    if top.variant == "large":
        if top.g1.s >= 2 * top.g1.r:
            g1v = pos.copy()
        else:
            if top.g1.s > 64:
                raise ParameterOverflowError("first-level range exceeds 64 bits")
            g1v = _mulshift_wide(pos, top.g1.a, top.g1.b, 2 * top.g1.r, top.g1.s)
        f = top.g2.eval_many(g1v)
        if f.dtype == object:
            f1 = np.array([int(v) % n for v in f], dtype=np.int64)
            img = np.array([int(v) % (n * n) for v in f], dtype=_U64)
        else:
            f1 = (f % _U64(n)).astype(np.int64)
            img = f % _U64(n * n)
        return KeyedImages(pos, vals, f1, img)
    # small variant: quotient plus root-selector bit
    f = _eval_f_small(top, pos)
    q = top.q
    ext = QuadExtField(PrimeField(q), top.A)
    if f.dtype == object:
        f1 = np.array([int(v) % n for v in f], dtype=np.int64)
        f2 = np.array([int(v) // n for v in f], dtype=_U64)
        ib = np.zeros(len(pos), dtype=np.uint8)
        for t, x in enumerate(pos):
            other = ext.other_root(top.a, top.b, ext.of_int(int(x)))
            ib[t] = 1 if int(x) > ext.to_int(other) else 0
    else:
        f1 = (f % _U64(n)).astype(np.int64)
        f2 = f // _U64(n)
        # other root = -b/a - x, computed componentwise
        e = ext.other_root(top.a, top.b, (0, 0))  # constant -b/a
        Q = _U64(q)
        x1 = pos // Q
        x0 = pos % Q
        o1 = (_U64(e[0]) + Q - x1) % Q
        o0 = (_U64(e[1]) + Q - x0) % Q
        other_int = o1 * Q + o0
        ib = (pos > other_int).astype(np.uint8)
    img = (f2 << _U64(1)) | ib.astype(_U64)
    return KeyedImages(pos, vals, f1, img, f2, ib)


# ---------------------------------------------------------------------------
# bucket kernels (numba with python fallback)

# kind codes produced by the bucket scan
_K_EMPTY = 0
_K_NEEDS_LARGE = 1
_K_SMALL_DONE = 2
_K_NEEDS_SMALL = 3
_K_DUPLICATE = 4


def _bucket_scan_py(imgs, starts, threshold, out_mask, out_kind, out_cells):
    nb = len(starts) - 1
    for i in range(nb):
        lo = starts[i]
        hi = starts[i + 1]
        size = hi - lo
        if size == 0:
            out_kind[i] = 0
            continue
        dup = False
        for t in range(lo, hi - 1):
            if imgs[t] == imgs[t + 1]:
                dup = True
                break
        if dup:
            out_kind[i] = 4
            continue
        if size > threshold:
            out_kind[i] = 1
            continue
        mask = np.uint64(0)
        for t in range(lo, hi - 1):
            x = imgs[t] ^ imgs[t + 1]
            x |= x >> np.uint64(1)
            x |= x >> np.uint64(2)
            x |= x >> np.uint64(4)
            x |= x >> np.uint64(8)
            x |= x >> np.uint64(16)
            x |= x >> np.uint64(32)
            mask |= x ^ (x >> np.uint64(1))
        out_mask[i] = mask
        nprime = 0
        mm = mask
        while mm:
            nprime += int(mm & np.uint64(1))
            mm >>= np.uint64(1)
        # bhat = next power of two >= size; s = 2*log2(bhat) + 2
        lb = 0
        while (1 << lb) < size:
            lb += 1
        s = 2 * lb + 2
        if nprime > s:
            out_kind[i] = 3
            continue
        out_kind[i] = 2
        for t in range(lo, hi):
            x = imgs[t]
            p = np.uint64(0)
            idx = 0
            mm = mask
            posb = 0
            while mm:
                if mm & np.uint64(1):
                    p |= ((x >> np.uint64(posb)) & np.uint64(1)) << np.uint64(idx)
                    idx += 1
                mm >>= np.uint64(1)
                posb += 1
            out_cells[t] = np.int64(p)


def _place_scan_py(
    order, f1, imgs, bcorr, sarr, offsets, tag, F1, F2, r_img, occupancy, out_cell
):
    for oi in range(len(order)):
        t = order[oi]
        i = f1[t]
        if bcorr[i] == 0:
            out_cell[t] = -1
            continue
        tg = tag[i]
        x = imgs[t]
        s = sarr[i]
        if tg == 1:
            r = r_img
            a = F1[i]
        elif tg == 2:
            mask = F1[i]
            p = np.uint64(0)
            idx = 0
            mm = mask
            posb = 0
            while mm:
                if mm & np.uint64(1):
                    p |= ((x >> np.uint64(posb)) & np.uint64(1)) << np.uint64(idx)
                    idx += 1
                mm >>= np.uint64(1)
                posb += 1
            x = p
            r = idx
            a = F2[i]
        else:
            out_cell[t] = -1
            continue
        if s >= r:
            y = x
        else:
            prod = x * a
            if r < 64:
                prod &= (np.uint64(1) << np.uint64(r)) - np.uint64(1)
            y = prod >> np.uint64(r - s)
        cell = offsets[i] + np.int64(y)
        if cell >= offsets[i + 1]:
            out_cell[t] = -1
            continue
        if occupancy[cell]:
            out_cell[t] = -1
            continue
        occupancy[cell] = 1
        out_cell[t] = cell


try:  # pragma: no cover - exercised implicitly
    from numba import njit

    _bucket_scan = njit(cache=True)(_bucket_scan_py)
    _place_scan = njit(cache=True)(_place_scan_py)
except ImportError:  # pragma: no cover
    _bucket_scan = _bucket_scan_py
    _place_scan = _place_scan_py


# ---------------------------------------------------------------------------
# shared bucket-array builder

@dataclass
class BucketArrays:
    """Bucket sizes, descriptor records and cell geometry."""

    b: np.ndarray  # int64 sizes, length n
    records: np.ndarray  # uint64 descriptor records (requires w_B <= 64)
    offsets: np.ndarray  # int64 prefix sums of cell counts, length n+1
    cells: np.ndarray  # int64 global cell index per key (sorted order), -1 dropped


def _ceil_log2_vec(v: np.ndarray) -> np.ndarray:
    """ceil(log2(v)) for integer v >= 1, exact (frexp exponent of v-1)."""
    _, e = np.frexp((v - 1).astype(np.float64))
    return e.astype(np.int64)


def _bucket_geometry(sizes: np.ndarray) -> np.ndarray:
    """Prefix sums of 4*bhat^2 per bucket (0 cells for empty buckets)."""
    sizes = sizes.astype(np.int64)
    bhat = np.zeros_like(sizes)
    nz = sizes > 0
    if nz.any():
        bhat[nz] = np.int64(1) << _ceil_log2_vec(sizes[nz])
    counts = 4 * bhat * bhat
    return np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)


def _s_for_sizes(sizes: np.ndarray) -> np.ndarray:
    """Second-level output width s = 2*log2(bhat) + 2 per bucket."""
    sizes = sizes.astype(np.int64)
    s = np.zeros_like(sizes)
    nz = sizes > 0
    if nz.any():
        s[nz] = 2 * _ceil_log2_vec(sizes[nz]) + 2
    return s


def build_bucket_arrays(
    ki: KeyedImages, n: int, layout: Layout, sizes_override: np.ndarray | None = None
) -> tuple[BucketArrays, np.ndarray]:
    """Build b, B records and per-key cells from one party's keys.

    Keys are grouped by bucket and sorted by image (the canonical order
    both parties share).  Returns the arrays plus the sorting
    permutation into the grouped order.

    When sizes_override is given (receiver case: the sender's corrected
    sizes), buckets whose own size disagrees get the all-zero filler
    record and their keys are dropped from cell placement.
    """
    order = np.lexsort((ki.img, ki.f1))
    f1s = ki.f1[order]
    imgs = ki.img[order]
    own_sizes = np.bincount(ki.f1, minlength=n).astype(np.int64) if n else np.zeros(0, np.int64)
    starts = np.concatenate([[0], np.cumsum(own_sizes)]).astype(np.int64)
    sizes = own_sizes if sizes_override is None else sizes_override.astype(np.int64)

    threshold = log2_ceil(n) if n else 1
    mask_arr = np.zeros(n, dtype=_U64)
    kind = np.zeros(n, dtype=np.uint8)
    cells_local = np.full(len(imgs), -1, dtype=np.int64)
    if n:
        _bucket_scan(imgs, starts, threshold, mask_arr, kind, cells_local)

    records = np.zeros(n, dtype=_U64)
    w2 = layout.w2
    r_img = layout.r_img
    if layout.w_B > 64:
        raise ParameterOverflowError("descriptor record exceeds 64 bits")
    tag_shift = _U64(r_img + w2)
    done = kind == _K_SMALL_DONE
    records[done] = (
        (_U64(2) << tag_shift) | (mask_arr[done] << _U64(w2)) | _U64(1)
    )
    # python fallback for rare buckets (large path or compressed search)
    for i in np.nonzero((kind == _K_NEEDS_LARGE) | (kind == _K_NEEDS_SMALL))[0]:
        bucket_imgs = [int(v) for v in imgs[starts[i] : starts[i + 1]]]
        desc = build_bucket_hash(bucket_imgs, n, r_img)
        if desc.kind == "large":
            records[i] = (_U64(1) << tag_shift) | (_U64(desc.dms.a) << _U64(w2))
        else:
            records[i] = (
                (_U64(2) << tag_shift)
                | (_U64(desc.bitsel.mask) << _U64(w2))
                | _U64(desc.dms.a)
            )
        for t in range(starts[i], starts[i + 1]):
            cells_local[t] = eval_bucket_hash(desc, int(imgs[t]))

    if sizes_override is not None:
        mismatched = own_sizes != sizes
        records[mismatched] = 0  # filler: own content cannot match the sender's
        records[kind == _K_DUPLICATE] = 0
    records[sizes == 0] = _U64(layout.null_B)

    offsets = _bucket_geometry(sizes)
    cells = np.full(len(imgs), -1, dtype=np.int64)
    ok = np.zeros(len(imgs), dtype=bool)
    for i in range(n):
        lo, hi = starts[i], starts[i + 1]
        if lo == hi:
            continue
        usable = (
            sizes[i] == own_sizes[i]
            and kind[i] != _K_DUPLICATE
            and sizes[i] > 0
        )
        if usable:
            ok[lo:hi] = cells_local[lo:hi] >= 0
    valid = ok & (cells_local >= 0)
    cells[valid] = offsets[f1s[valid]] + cells_local[valid]
    arrays = BucketArrays(sizes, records, offsets, cells)
    return arrays, order


# ---------------------------------------------------------------------------
# cell records

def _compose_beta(ki: KeyedImages, order, cells, layout: Layout, total_cells: int) -> WideArray:
    """Cell table with one record per placed key."""
    beta = WideArray.zeros(total_cells, layout.w_beta)
    placed = cells >= 0
    idx = cells[placed]
    pos = ki.positions[order][placed]
    vals = ki.values[order][placed]
    sb = layout.sigma_bits
    if layout.variant == "large":
        xb = layout.x_bits
        rec = WideArray.zeros(len(idx), layout.w_beta)
        rec.deposit_chunk(0, sb, vals)
        rec.deposit_chunk(sb, xb, pos)
        rec.deposit_chunk(sb + xb, 1, np.ones(len(idx), dtype=_U64))
        for l in range(beta.limbs.shape[0]):
            beta.limbs[l, idx] = rec.limbs[l]
        return beta
    f2 = ki.f2[order][placed]
    ib = ki.ibit[order][placed].astype(_U64)
    fb = layout.f2_bits
    rec = WideArray.zeros(len(idx), layout.w_beta)
    rec.deposit_chunk(0, sb, vals)
    rec.deposit_chunk(sb, fb, f2)
    rec.deposit_chunk(sb + fb, 1, ib)
    rec.deposit_chunk(sb + fb + 1, 1, np.ones(len(idx), dtype=_U64))
    for l in range(beta.limbs.shape[0]):
        beta.limbs[l, idx] = rec.limbs[l]
    return beta


# ---------------------------------------------------------------------------
# digest build (sender) and rebuild stages (receiver)

@dataclass
class FksDigest:
    """The sender's three arrays plus everything needed to rebuild them."""

    top: TopHashDescriptor
    layout: Layout
    sigma: int
    b: np.ndarray  # int64 bucket sizes
    B: np.ndarray  # uint64 descriptor records
    beta: WideArray  # cell records
    offsets: np.ndarray  # int64, length n+1

    @property
    def total_cells(self) -> int:
        return int(self.offsets[-1]) if len(self.offsets) else 0


def build_fks(
    s: SparseString, rng: random.Random, alpha: int | None = None
) -> FksDigest:
    """Construct the full sender-side digest (Las Vegas, expected O(n))."""
    s.validate()
    n = s.n
    if n == 0:
        u_round, u_round_log = round_universe(s.u)
        top = TopHashDescriptor(
            "large", s.u, u_round_log, 0,
            g1=TwoWiseParams(1, 0, u_round_log, min(2, 2 * u_round_log)),
            g2=ThreeWiseParams(find_prime_in(4, 8, rng or random.Random(0)), 0, 0, 0, 0),
        )
        layout = compute_layout(top, s.sigma)
        return FksDigest(
            top, layout, s.sigma,
            np.zeros(0, dtype=np.int64), np.zeros(0, dtype=_U64),
            WideArray.zeros(0, layout.w_beta), np.zeros(1, dtype=np.int64),
        )
    positions = [x for x, _ in s.pairs]
    values = [c for _, c in s.pairs]
    top = build_top_hash(positions, s.u, n, rng, alpha)
    layout = compute_layout(top, s.sigma)
    ki = evaluate_keys(top, positions, values)
    arrays, order = build_bucket_arrays(ki, n, layout)
    if int((arrays.cells >= 0).sum()) != n:
        raise HamsyncError("internal error: sender produced a dropped key")
    beta = _compose_beta(ki, order, arrays.cells, layout, int(arrays.offsets[-1]))
    return FksDigest(top, layout, s.sigma, arrays.b, arrays.records, beta, arrays.offsets)


def receiver_rebuild_b(ki: KeyedImages, n: int, layout: Layout) -> np.ndarray:
    """Bucket histogram of the receiver's keys, clamped to the symbol width."""
    counts = np.bincount(ki.f1, minlength=n).astype(np.int64)
    cap = (1 << layout.w_b) - 1
    return np.minimum(counts, cap)


def receiver_rebuild_B(
    ki: KeyedImages, n: int, layout: Layout, b_corrected: np.ndarray
) -> np.ndarray:
    """Descriptor records for equal-size buckets; filler elsewhere."""
    arrays, _ = build_bucket_arrays(ki, n, layout, sizes_override=b_corrected)
    return arrays.records


def receiver_rebuild_beta(
    ki: KeyedImages,
    n: int,
    layout: Layout,
    b_corrected: np.ndarray,
    B_corrected: np.ndarray,
) -> tuple[WideArray, np.ndarray]:
    """Cell table built with the sender's corrected geometry and hashes.

    Keys are placed through the sender's descriptors; on a cell
    collision the smallest position wins; keys falling into
    sender-empty buckets or out of range are dropped (their cells get
    repaired by the code).
    """
    sizes = b_corrected.astype(np.int64)
    offsets = _bucket_geometry(sizes)
    total = int(offsets[-1])
    recs = np.asarray(B_corrected, dtype=_U64)
    tag = (recs >> _U64(layout.r_img + layout.w2)).astype(np.int64)
    F1 = (recs >> _U64(layout.w2)) & _U64((1 << layout.r_img) - 1)
    F2 = recs & _U64((1 << layout.w2) - 1)
    sarr = _s_for_sizes(sizes)
    order = np.argsort(ki.positions, kind="stable")
    occupancy = np.zeros(total, dtype=np.uint8)
    out_cell = np.full(len(ki.positions), -1, dtype=np.int64)
    if len(ki.positions):
        _place_scan(
            order.astype(np.int64), ki.f1, ki.img, sizes, sarr,
            offsets, tag, F1, F2, layout.r_img, occupancy, out_cell,
        )
    ident = np.arange(len(ki.positions), dtype=np.int64)
    beta = _compose_beta(ki, ident, out_cell, layout, total)
    return beta, offsets


def extract_string(
    beta: WideArray,
    top: TopHashDescriptor,
    layout: Layout,
    sigma: int,
    offsets: np.ndarray,
) -> SparseString:
    """Read the sender's pairs back out of a corrected cell table."""
    sb = layout.sigma_bits
    if layout.variant == "large":
        present = beta.extract_chunk(sb + layout.x_bits, 1) != 0
        idx = np.nonzero(present)[0]
        xs = beta.extract_chunk(sb, layout.x_bits)[idx]
        cs = beta.extract_chunk(0, sb)[idx]
        pairs = [(int(x), int(c)) for x, c in zip(xs, cs)]
        return SparseString(top.u, sigma, pairs)
    fb = layout.f2_bits
    present = beta.extract_chunk(sb + fb + 1, 1) != 0
    idx = np.nonzero(present)[0]
    cs = beta.extract_chunk(0, sb)[idx]
    f2 = beta.extract_chunk(sb, fb)[idx]
    ib = beta.extract_chunk(sb + fb, 1)[idx]
    buckets = np.searchsorted(offsets, idx, side="right") - 1
    n = top.n
    vs = f2.astype(np.int64) * n + buckets.astype(np.int64)
    if top.q < TABLE_LIMIT:
        xs = _solve_cells_small(top, vs, ib.astype(np.int64))
        pairs = [(int(x), int(c)) for x, c in zip(xs, cs)]
        return SparseString(top.u, sigma, pairs)
    ext = QuadExtField(PrimeField(top.q), top.A)
    pairs = []
    for j in range(len(idx)):
        roots = ext.solve_quadratic(top.a, top.b, top.c, ext.of_int(int(vs[j])))
        if roots is None:
            raise HamsyncError("inconsistent cell: quadratic has no root")
        x = ext.to_int(roots[int(ib[j])])
        pairs.append((x, int(cs[j])))
    return SparseString(top.u, sigma, pairs)


def _solve_cells_small(
    top: TopHashDescriptor, vs: np.ndarray, ib: np.ndarray
) -> np.ndarray:
    """Vectorized per-cell quadratic solve over F_{q^2} using field tables.

    Mirrors QuadExtField.solve_quadratic / sqrt element-by-element; only
    valid when q is small enough to have inverse and sqrt tables.
    """
    base = PrimeField(top.q)
    ext = QuadExtField(base, top.A)
    q, A = top.q, top.A
    sqrt_tab = base.sqrt_table
    inv_tab = base.inv_table
    a, b, c = top.a, top.b, top.c
    # disc = (b^2 - 4ac) + 4a*v
    d0 = ext.sub(ext.mul(b, b), ext.scalar_mul(4, ext.mul(a, c)))
    ch, cl = ext.scalar_mul(4, a)
    vh, vl = vs // q, vs % q
    dh = (ch * vl + cl * vh + d0[0]) % q
    dl = (cl * vl + (A * ch % q) * vh + d0[1]) % q
    # sqrt(disc) via the norm characterization
    norm = (dl * dl - A * (dh * dh % q)) % q
    nr = sqrt_tab[norm]
    if (nr == q).any():
        raise HamsyncError("inconsistent cell: quadratic has no root")
    inv2 = base.inv(2)
    inv_A = base.inv(A)
    rh = np.zeros_like(dh)
    rl = np.zeros_like(dl)
    zero_h = dh == 0
    # pure base-field disc: root is sqrt(l) or gamma*sqrt(l/A)
    r_base = sqrt_tab[dl]
    r_ext = sqrt_tab[dl * inv_A % q]
    in_base = r_base < q
    if ((~in_base) & zero_h & (r_ext == q)).any():
        raise HamsyncError("inconsistent cell: quadratic has no root")
    rl[zero_h & in_base] = r_base[zero_h & in_base]
    rh[zero_h & ~in_base] = r_ext[zero_h & ~in_base]
    # general case: y0 from the residue candidate (l +- nr)/2, y1 = h/(2*y0)
    gen = ~zero_h
    if gen.any():
        c1 = (dl + nr) * inv2 % q
        c2 = (dl - nr) * inv2 % q
        r1 = sqrt_tab[c1]
        r2 = sqrt_tab[c2]
        use1 = (r1 < q) & (r1 != 0)
        y0 = np.where(use1, r1, r2)
        if ((y0 == q) | (y0 == 0))[gen].any():
            raise HamsyncError("inconsistent cell: quadratic has no root")
        y1 = dh * inv_tab[2 * y0 % q] % q
        rh[gen] = y1[gen]
        rl[gen] = y0[gen]
    # roots of the quadratic: (-b +- sqrt(disc)) / (2a), ordered by encoding
    nbh, nbl = ext.neg(b)
    ph, pl = ext.inv(ext.scalar_mul(2, a))
    sh, sl = (nbh + rh) % q, (nbl + rl) % q
    th, tl = (nbh - rh) % q, (nbl - rl) % q
    apl = A * ph % q
    x0 = ((sh * pl + sl * ph) % q) * q + (sl * pl + apl * sh) % q
    x1 = ((th * pl + tl * ph) % q) * q + (tl * pl + apl * th) % q
    lo = np.minimum(x0, x1)
    hi = np.maximum(x0, x1)
    return np.where(ib == 0, lo, hi)
