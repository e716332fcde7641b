"""Systematic Reed-Solomon codes over GF(2^m), plus wide-symbol chunking.

The encoder is systematic: data symbols are never modified; 2k check
symbols are appended, computed as the unique polynomial of degree < 2k
agreeing with data(x)*x^{2k} at the 2k generator roots (equivalently,
the remainder mod the generator).  Evaluation at the roots skips zero
data symbols, so encoding a mostly-empty array costs O(k * nonzeros).

Decoding: syndromes -> Berlekamp-Massey -> Chien search over data
positions -> Forney magnitudes -> syndrome re-verification.

Wide symbols (wider than m bits) are handled by the chunked codec:
each symbol is split into little-endian m-bit slices, slice j of every
symbol forms stream j, and each stream is RS-coded independently.  One
wide-symbol error touches at most one position per stream.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .bitpack import WideArray
from .errors import UncorrectableError

# One primitive polynomial per field size.
PRIM_POLY = {
    2: 0x7, 3: 0xB, 4: 0x13, 5: 0x25, 6: 0x43, 7: 0x89, 8: 0x11D,
    9: 0x211, 10: 0x409, 11: 0x805, 12: 0x1053, 13: 0x201B, 14: 0x4443,
    15: 0x8003, 16: 0x1100B, 17: 0x20009, 18: 0x40081, 19: 0x80027,
    20: 0x100009, 21: 0x200005, 22: 0x400003, 23: 0x800021, 24: 0x1000087,
}

_U64 = np.uint64


# ---------------------------------------------------------------------------
# numba kernels with pure-python fallbacks

def _gen_tables_py(m, poly, exp, log):
    order = (1 << m) - 1
    x = 1
    for i in range(order):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x >> m:
            x ^= poly
    for i in range(order, 2 * order):
        exp[i] = exp[i - order]
    return x


def _eval_at_roots_py(pos, logs, nsynd, exp, order):
    # out[j] = xor_t exp[(logs[t] + j*pos[t]) % order]; the inner index
    # advances by pos[t] each step, so the multiply/mod reduces to an
    # add with a conditional subtract.
    out = np.zeros(nsynd, dtype=np.uint64)
    for t in range(len(pos)):
        step = pos[t] % order
        idx = logs[t] % order
        for j in range(nsynd):
            out[j] ^= exp[idx]
            idx += step
            if idx >= order:
                idx -= order
    return out


def _berlekamp_massey_py(synd, exp, log, order):
    n = len(synd)
    lam = np.zeros(n + 1, dtype=np.uint64)
    prev = np.zeros(n + 1, dtype=np.uint64)
    tmp = np.zeros(n + 1, dtype=np.uint64)
    lam[0] = 1
    prev[0] = 1
    L = 0
    shift = 1
    b = np.uint64(1)
    for r in range(n):
        delta = np.uint64(0)
        for i in range(min(L, r) + 1):
            if lam[i] and synd[r - i]:
                delta ^= exp[(int(log[lam[i]]) + int(log[synd[r - i]])) % order]
        if delta == 0:
            shift += 1
            continue
        scale = (int(log[delta]) - int(log[b])) % order
        for i in range(n + 1):
            tmp[i] = lam[i]
        for i in range(n + 1 - shift):
            if prev[i]:
                lam[i + shift] ^= exp[(int(log[prev[i]]) + scale) % order]
        if 2 * L <= r:
            L = r + 1 - L
            for i in range(n + 1):
                prev[i] = tmp[i]
            b = delta
            shift = 1
        else:
            shift += 1
    return lam, L


def _chien_py(tlog, steps, npos, max_roots, exp, order):
    # tlog[c] is the log of the c-th nonzero locator term at the first
    # data position; each step adds steps[c] (the log of alpha^{-deg}).
    # Working in the log domain needs one table load per term.
    roots = np.empty(max_roots, dtype=np.int64)
    cnt = 0
    nt = len(tlog)
    for i in range(npos):
        s = np.uint64(0)
        for c in range(nt):
            s ^= exp[tlog[c]]
            t = tlog[c] + steps[c]
            if t >= order:
                t -= order
            tlog[c] = t
        if s == 0:
            roots[cnt] = i
            cnt += 1
            if cnt == max_roots:
                break
    return roots[:cnt]


def _forney_py(synd, lam, L, roots, k2, exp, log, order):
    # omega = synd * lam mod x^{2k}; magnitude at root position i is
    # X * omega(1/X) / lam'(1/X) with X = alpha^{2k+i}.  Returns the
    # magnitudes plus the index of any root with a zero derivative.
    omega = np.zeros(k2, dtype=np.uint64)
    for a in range(L + 1):
        if lam[a]:
            la = log[lam[a]]
            for b in range(k2 - a):
                if synd[b]:
                    omega[a + b] ^= exp[la + log[synd[b]]]
    mags = np.zeros(len(roots), dtype=np.uint64)
    bad = -1
    for t in range(len(roots)):
        xi_log = (k2 + roots[t]) % order
        xinv_log = order - xi_log if xi_log else 0
        ov = np.uint64(0)
        for c in range(k2 - 1, -1, -1):
            if ov:
                ov = np.uint64(exp[(log[ov] + xinv_log) % order])
            ov ^= omega[c]
        dv = np.uint64(0)
        for c in range(1, L + 1, 2):
            if lam[c]:
                dv ^= np.uint64(exp[(log[lam[c]] + (c - 1) * xinv_log) % order])
        if dv == 0:
            bad = t
            break
        if ov:
            mags[t] = exp[(xi_log + log[ov] + order - log[dv]) % order]
    return mags, bad


_HAVE_NUMBA = False
try:  # pragma: no cover - exercised implicitly
    from numba import njit

    _gen_tables = njit(cache=True)(_gen_tables_py)
    _eval_at_roots = njit(cache=True)(_eval_at_roots_py)
    _berlekamp_massey = njit(cache=True)(_berlekamp_massey_py)
    _chien = njit(cache=True)(_chien_py)
    _forney = njit(cache=True)(_forney_py)
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _gen_tables = _gen_tables_py
    _eval_at_roots = _eval_at_roots_py
    _berlekamp_massey = _berlekamp_massey_py
    _chien = _chien_py
    _forney = _forney_py


# ---------------------------------------------------------------------------
# field tables

class GF2m:
    """GF(2^m) log/exp tables (exp doubled to avoid index reduction)."""

    def __init__(self, m: int):
        if m not in PRIM_POLY:
            raise ValueError(f"unsupported symbol width m={m}")
        self.m = m
        self.order = (1 << m) - 1
        # uint32 keeps the tables cache-resident for the large fields
        self.exp = np.zeros(2 * self.order, dtype=np.uint32)
        self.log = np.zeros(1 << m, dtype=np.int64)
        wrapped = _gen_tables(m, PRIM_POLY[m], self.exp, self.log)
        if wrapped != 1:
            raise ValueError(f"polynomial for m={m} is not primitive")

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return int(self.exp[int(self.log[a]) + int(self.log[b])])

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("zero has no inverse")
        return int(self.exp[self.order - int(self.log[a])])

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b)) if a else 0


@lru_cache(maxsize=None)
def get_field(m: int) -> GF2m:
    return GF2m(m)


def _poly_mul(gf: GF2m, a: list[int], b: list[int]) -> list[int]:
    out = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                if bj:
                    out[i + j] ^= gf.mul(ai, bj)
    return out


@lru_cache(maxsize=None)
def _interp_matrix(m: int, k: int) -> np.ndarray:
    """W[j, c]: coefficient c of the Lagrange basis poly at root alpha^j.

    The check polynomial is r = sum_j e_j * W[j] where e_j is the target
    value at root j.  Built once per (m, k) and cached.
    """
    gf = get_field(m)
    nsynd = 2 * k
    roots = [int(gf.exp[j]) for j in range(nsynd)]
    g = [1]
    for rho in roots:
        g = _poly_mul(gf, g, [rho, 1])
    W = np.zeros((nsynd, nsynd), dtype=_U64)
    for j, rho in enumerate(roots):
        # synthetic division: q = g / (x - rho), degree nsynd - 1
        q = [0] * nsynd
        carry = g[nsynd]
        for c in range(nsynd - 1, -1, -1):
            q[c] = carry
            carry = g[c] ^ gf.mul(carry, rho)
        # scale by 1 / q(rho) = 1 / g'(rho)
        qr = 0
        for c in range(nsynd - 1, -1, -1):
            qr = gf.mul(qr, rho) ^ q[c]
        s = gf.inv(qr)
        for c in range(nsynd):
            W[j, c] = gf.mul(q[c], s)
    return W


# ---------------------------------------------------------------------------
# core codec

class RsCode:
    """Systematic RS code: n data symbols, 2k check symbols, over GF(2^m)."""

    def __init__(self, m: int, n: int, k: int):
        if k < 0 or n < 0:
            raise ValueError("lengths must be non-negative")
        if n + 2 * k > (1 << m) - 1:
            raise ValueError(f"codeword length {n + 2 * k} exceeds field 2^{m}-1")
        self.m = m
        self.n = n
        self.k = k
        self.gf = get_field(m)

    def _check_symbols(self, data: np.ndarray) -> None:
        if len(data) != self.n:
            raise ValueError(f"expected {self.n} data symbols, got {len(data)}")
        if len(data) and int(data.max()) >> self.m:
            raise ValueError("symbol out of field")

    def encode(self, data) -> np.ndarray:
        """2k check symbols (coefficient order, low degree first)."""
        data = np.asarray(data, dtype=_U64)
        self._check_symbols(data)
        k2 = 2 * self.k
        if k2 == 0:
            return np.zeros(0, dtype=_U64)
        gf = self.gf
        nz = np.nonzero(data)[0]
        if len(nz) == 0:
            return np.zeros(k2, dtype=_U64)
        # e[j] = data(alpha^j) * alpha^{j*2k}: evaluate terms at degrees 2k+i
        pos = (nz + k2).astype(np.int64)
        logs = gf.log[data[nz]]
        e = _eval_at_roots(pos, logs, k2, gf.exp, gf.order)
        # interpolate the degree < 2k check polynomial through the e values
        W = _interp_matrix(self.m, self.k)
        red = np.zeros(k2, dtype=_U64)
        for j in range(k2):
            if e[j]:
                lj = int(gf.log[e[j]])
                row = W[j]
                mask = row != 0
                red[mask] ^= gf.exp[gf.log[row[mask]] + lj]
        return red

    def _syndromes(self, data: np.ndarray, red: np.ndarray) -> np.ndarray:
        # One sparse evaluation covers the whole codeword: check symbols
        # sit at degrees 0..2k-1, data symbols at 2k..2k+n-1.
        gf = self.gf
        k2 = 2 * self.k
        nzr = np.nonzero(red)[0]
        nzd = np.nonzero(data)[0]
        pos = np.concatenate([nzr, nzd + k2]).astype(np.int64)
        if len(pos) == 0:
            return np.zeros(k2, dtype=_U64)
        logs = np.concatenate([gf.log[red[nzr]], gf.log[data[nzd]]])
        return _eval_at_roots(pos, logs, k2, gf.exp, gf.order)

    def correct(self, data, red) -> np.ndarray:
        """Recover the original data from <= k substitution errors.

        The check symbols are trusted (the protocol channel delivers them
        intact); only data positions are repaired.
        """
        data = np.asarray(data, dtype=_U64).copy()
        self._check_symbols(data)
        red = np.asarray(red, dtype=_U64)
        if len(red) != 2 * self.k:
            raise ValueError(f"expected {2 * self.k} check symbols, got {len(red)}")
        if self.k == 0:
            return data
        gf = self.gf
        k2 = 2 * self.k
        synd = self._syndromes(data, red)
        if not synd.any():
            return data
        lam, L = _berlekamp_massey(synd, gf.exp, gf.log, gf.order)
        if L > self.k:
            raise UncorrectableError(f"uncorrectable: {L} errors exceed budget {self.k}")
        lam = lam[: L + 1]
        if lam[L] == 0:
            raise UncorrectableError("uncorrectable: degenerate error locator")
        # Chien search restricted to data positions (degrees 2k .. 2k+n-1),
        # carried in the log domain over the nonzero locator terms.
        nzc = np.nonzero(lam)[0]
        tlog = ((gf.log[lam[nzc]] - k2 * nzc) % gf.order).astype(np.int64)
        steps = ((-nzc) % gf.order).astype(np.int64)
        roots = _chien(tlog, steps, self.n, L, gf.exp, gf.order)
        if len(roots) != L:
            raise UncorrectableError("uncorrectable: error locator roots missing")
        mags, bad = _forney(
            synd, lam, L, roots.astype(np.int64), k2, gf.exp, gf.log, gf.order
        )
        if bad >= 0:
            raise UncorrectableError("uncorrectable: zero locator derivative")
        data[roots] ^= mags
        # Verify the repair: syndromes are linear, so the corrected word is
        # a codeword iff the correction's own syndromes cancel the old ones.
        nzm = np.nonzero(mags)[0]
        delta = synd.copy()
        if len(nzm):
            delta ^= _eval_at_roots(
                (roots[nzm] + k2).astype(np.int64),
                gf.log[mags[nzm]], k2, gf.exp, gf.order,
            )
        if delta.any():
            raise UncorrectableError("uncorrectable: residual syndromes after repair")
        return data


# ---------------------------------------------------------------------------
# wide-symbol chunking

def chunk_width_for(length: int, k: int) -> int:
    """Field symbol width for a stream of `length` data symbols, budget k."""
    return max((length + 2 * k).bit_length(), 4)


@dataclass
class ChunkedRedundancy:
    """RS check symbols for an array of wide symbols, one block per slice."""

    symbol_bits: int
    chunk_bits: int
    chunk_count: int
    k: int
    streams: np.ndarray  # shape (chunk_count, 2k), uint64

    @property
    def bit_size(self) -> int:
        return self.chunk_count * 2 * self.k * self.chunk_bits

    def __eq__(self, other) -> bool:
        if not isinstance(other, ChunkedRedundancy):
            return NotImplemented
        return (
            self.symbol_bits == other.symbol_bits
            and self.chunk_bits == other.chunk_bits
            and self.chunk_count == other.chunk_count
            and self.k == other.k
            and np.array_equal(self.streams, other.streams)
        )


def _as_wide(symbols, symbol_bits: int) -> WideArray:
    if isinstance(symbols, WideArray):
        if symbols.bits != symbol_bits:
            raise ValueError("symbol width mismatch")
        return symbols
    if isinstance(symbols, np.ndarray) and symbols.dtype == _U64 and symbol_bits <= 64:
        if symbol_bits < 64 and len(symbols) and int(symbols.max()) >> symbol_bits:
            raise ValueError("value out of range")
        return WideArray(symbol_bits, symbols.reshape(1, -1))
    return WideArray.from_ints(list(symbols), symbol_bits)


def chunked_encode(symbols, symbol_bits: int, k: int) -> ChunkedRedundancy:
    """Encode an array of wide symbols into per-slice RS check symbols."""
    wide = _as_wide(symbols, symbol_bits)
    n = len(wide)
    m = chunk_width_for(n, k)
    chunk_count = (symbol_bits + m - 1) // m
    code = RsCode(m, n, k)
    streams = np.zeros((chunk_count, 2 * k), dtype=_U64)
    for j in range(chunk_count):
        width = min(m, symbol_bits - j * m)
        streams[j] = code.encode(wide.extract_chunk(j * m, width))
    return ChunkedRedundancy(symbol_bits, m, chunk_count, k, streams)


def chunked_correct(symbols, red: ChunkedRedundancy, k: int | None = None):
    """Repair <= k wide-symbol substitutions using per-slice redundancy.

    Returns the corrected array in the same form the input used
    (WideArray in, WideArray out; plain sequence in, list of ints out).
    """
    if k is None:
        k = red.k
    if k != red.k:
        raise ValueError("error budget does not match redundancy")
    as_wide_in = isinstance(symbols, WideArray)
    wide = _as_wide(symbols, red.symbol_bits)
    n = len(wide)
    m = red.chunk_bits
    if red.chunk_count != (red.symbol_bits + m - 1) // m:
        raise ValueError("inconsistent chunk count")
    code = RsCode(m, n, k)
    out = WideArray.zeros(n, red.symbol_bits)
    for j in range(red.chunk_count):
        width = min(m, red.symbol_bits - j * m)
        fixed = code.correct(wide.extract_chunk(j * m, width), red.streams[j])
        if width < 64 and len(fixed) and int(fixed.max()) >> width:
            raise UncorrectableError("uncorrectable: repaired slice out of range")
        out.deposit_chunk(j * m, width, fixed)
    return out if as_wide_in else out.to_ints()
