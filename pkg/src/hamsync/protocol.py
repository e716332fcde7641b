"""One-way reconciliation protocol: digest message, wire format, recovery.

The sender holds a sparse string s and emits a single message; a
receiver whose string t differs from s in at most k positions recovers
s exactly.  The message carries the top-level hash parameters plus
systematic error-correction redundancy for the three digest arrays
(bucket sizes b, bucket descriptors B, cell table beta).  The receiver
rebuilds its own versions of the arrays from t, repairs each in turn
with the redundancy, and reads s back out of the repaired cell table.

Wire format (all integers little-endian):

    magic "HSYN" | version u16 | flags u16 | u u64 | u_round_log u8 |
    sigma u64 | n u64 | k u64 | top-hash block | 3 redundancy blocks |
    crc32 u32

flags bit 0 selects the small-universe top-hash block (q, A and three
field pairs) over the large one (r, a, b as u128s, then P, a2, b2, c2);
bit 1 marks k == 0.  Each redundancy block is symbol_bits u16,
chunk_bits u8, chunk_count u16, byte-length u32, then the check-symbol
streams packed tightly and padded to a byte boundary per stream.
"""

from __future__ import annotations

import random
import struct
import zlib
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .bitpack import pack_symbols, unpack_symbols
from .digest import (
    FksDigest,
    Layout,
    SparseString,
    TopHashDescriptor,
    build_fks,
    compute_layout,
    evaluate_keys,
    extract_string,
    receiver_rebuild_B,
    receiver_rebuild_b,
    receiver_rebuild_beta,
)
from .errors import ParameterOverflowError, WireFormatError
from .hashing import ThreeWiseParams, TwoWiseParams
from .rs import ChunkedRedundancy, chunked_correct, chunked_encode

MAGIC = b"HSYN"
VERSION = 1

_U64 = np.uint64

# Bits of pure framing that carry no protocol content: magic (32),
# version (16), checksum (32).
_FRAMING_BITS = 32 + 16 + 32

TraceHook = Callable[[str, int], None]


@dataclass
class Message:
    """Everything the sender transmits."""

    u: int
    sigma: int
    n: int
    k: int
    top: TopHashDescriptor
    red_b: ChunkedRedundancy
    red_B: ChunkedRedundancy
    red_beta: ChunkedRedundancy

    @property
    def layout(self) -> Layout:
        return compute_layout(self.top, self.sigma)


def assemble_message(digest: FksDigest, k: int) -> Message:
    """Attach error-correction redundancy for a given distance budget."""
    if k < 0:
        raise ValueError("k must be non-negative")
    lay = digest.layout
    red_b = chunked_encode(digest.b.astype(_U64), lay.w_b, k)
    red_B = chunked_encode(digest.B, lay.w_B, k)
    red_beta = chunked_encode(digest.beta, lay.w_beta, k)
    return Message(
        digest.top.u, digest.sigma, digest.top.n, k,
        digest.top, red_b, red_B, red_beta,
    )


def sender_encode(
    s: SparseString, k: int, rng: random.Random | None = None,
    alpha: int | None = None,
) -> Message:
    """Build the digest for s and package it for distance budget k."""
    if rng is None:
        rng = random.Random()
    digest = build_fks(s, rng, alpha)
    return assemble_message(digest, k)


def receiver_reconcile(
    t: SparseString, msg: Message, trace: TraceHook | None = None
) -> SparseString:
    """Recover the sender's string from t and the message.

    Correct whenever the Hamming distance between the strings is at
    most msg.k; raises UncorrectableError otherwise (never returns a
    wrong answer silently for in-budget inputs).  `trace`, if given, is
    called with ("b" | "B" | "beta", number of symbols repaired) after
    each correction stage.
    """
    t.validate()
    if t.u != msg.u or t.sigma != msg.sigma:
        raise ValueError("string parameters do not match the message")
    n = msg.n
    if n == 0:
        return SparseString(msg.u, msg.sigma, [])
    top = msg.top
    lay = msg.layout
    ki = evaluate_keys(top, [x for x, _ in t.pairs], [c for _, c in t.pairs])

    b_prime = receiver_rebuild_b(ki, n, lay).astype(_U64)
    b_fixed = np.asarray(chunked_correct(b_prime, msg.red_b), dtype=np.int64)
    if trace:
        trace("b", int((b_fixed != b_prime.astype(np.int64)).sum()))

    B_prime = receiver_rebuild_B(ki, n, lay, b_fixed)
    B_fixed = np.asarray(chunked_correct(B_prime, msg.red_B), dtype=_U64)
    if trace:
        trace("B", int((B_fixed != B_prime).sum()))

    beta_prime, offsets = receiver_rebuild_beta(ki, n, lay, b_fixed, B_fixed)
    beta_fixed = chunked_correct(beta_prime, msg.red_beta)
    if trace:
        diff = (beta_fixed.limbs != beta_prime.limbs).any(axis=0)
        trace("beta", int(diff.sum()))

    return extract_string(beta_fixed, top, lay, msg.sigma, offsets)


# ---------------------------------------------------------------------------
# serialization

def _require_u(value: int, bits: int, what: str) -> int:
    value = int(value)
    if value < 0 or value >> bits:
        raise ParameterOverflowError(f"{what} does not fit in {bits} bits")
    return value


def _pack_red(red: ChunkedRedundancy) -> bytes:
    parts = [
        struct.pack(
            "<HBH",
            _require_u(red.symbol_bits, 16, "symbol width"),
            _require_u(red.chunk_bits, 8, "chunk width"),
            _require_u(red.chunk_count, 16, "chunk count"),
        )
    ]
    payload = b"".join(
        pack_symbols(red.streams[j], red.chunk_bits)
        for j in range(red.chunk_count)
    )
    parts.append(struct.pack("<I", _require_u(len(payload), 32, "payload length")))
    parts.append(payload)
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.data):
            raise WireFormatError("truncated message")
        out = self.data[self.pos : self.pos + count]
        self.pos += count
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _unpack_red(rd: _Reader, k: int) -> ChunkedRedundancy:
    symbol_bits, chunk_bits, chunk_count = rd.unpack("<HBH")
    (paylen,) = rd.unpack("<I")
    payload = rd.take(paylen)
    per_stream = (2 * k * chunk_bits + 7) // 8
    if paylen != per_stream * chunk_count:
        raise WireFormatError("redundancy payload length mismatch")
    streams = np.zeros((chunk_count, 2 * k), dtype=_U64)
    for j in range(chunk_count):
        chunk = payload[j * per_stream : (j + 1) * per_stream]
        streams[j] = unpack_symbols(chunk, chunk_bits, 2 * k)
    return ChunkedRedundancy(symbol_bits, chunk_bits, chunk_count, k, streams)


def _pack_u128(value: int) -> bytes:
    value = _require_u(value, 128, "hash multiplier")
    return struct.pack("<QQ", value & ((1 << 64) - 1), value >> 64)


def _unpack_u128(rd: _Reader) -> int:
    lo, hi = rd.unpack("<QQ")
    return (hi << 64) | lo


def serialize(msg: Message) -> bytes:
    """Encode a message to bytes (framed with magic, version, CRC-32)."""
    top = msg.top
    small = top.variant == "small"
    flags = (1 if small else 0) | (2 if msg.k == 0 else 0)
    parts = [
        MAGIC,
        struct.pack(
            "<HHQBQQQ",
            VERSION,
            flags,
            _require_u(msg.u, 64, "universe size"),
            _require_u(top.u_round_log, 8, "universe log"),
            _require_u(msg.sigma, 64, "alphabet size"),
            _require_u(msg.n, 64, "support size"),
            _require_u(msg.k, 64, "distance budget"),
        ),
    ]
    if small:
        parts.append(
            struct.pack(
                "<QQQQQQQQ",
                _require_u(top.q, 64, "field order"),
                _require_u(top.A, 64, "extension constant"),
                top.a[0], top.a[1], top.b[0], top.b[1], top.c[0], top.c[1],
            )
        )
    else:
        g1, g2 = top.g1, top.g2
        parts.append(struct.pack("<B", _require_u(g1.r, 8, "key width")))
        parts.append(_pack_u128(g1.a))
        parts.append(_pack_u128(g1.b))
        parts.append(
            struct.pack(
                "<QQQQ",
                _require_u(g2.P, 64, "hash modulus"),
                _require_u(g2.a, 64, "hash coefficient"),
                _require_u(g2.b, 64, "hash coefficient"),
                _require_u(g2.c, 64, "hash coefficient"),
            )
        )
    for red in (msg.red_b, msg.red_B, msg.red_beta):
        parts.append(_pack_red(red))
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def _g1_width(n: int, r: int) -> int:
    """Output width of the first-level multiply-shift, as the sender picks it."""
    if n == 0:
        return min(2, 2 * r)
    nhat = 1 << max(n - 1, 0).bit_length() if n > 1 else 1
    return 2 * nhat.bit_length()


def deserialize(data: bytes) -> Message:
    """Decode bytes produced by serialize(); raises WireFormatError."""
    if len(data) < 4 or data[:4] != MAGIC:
        raise WireFormatError("bad magic")
    if len(data) < 8:
        raise WireFormatError("truncated message")
    (crc,) = struct.unpack("<I", data[-4:])
    if zlib.crc32(data[:-4]) != crc:
        raise WireFormatError("checksum mismatch")
    rd = _Reader(data[:-4])
    rd.take(4)
    version, flags, u, u_round_log, sigma, n, k = rd.unpack("<HHQBQQQ")
    if version != VERSION:
        raise WireFormatError("unsupported version")
    small = bool(flags & 1)
    if bool(flags & 2) != (k == 0):
        raise WireFormatError("inconsistent flags")
    if small:
        q, A, a_hi, a_lo, b_hi, b_lo, c_hi, c_lo = rd.unpack("<QQQQQQQQ")
        top = TopHashDescriptor(
            "small", u, u_round_log, n,
            q=q, A=A, a=(a_hi, a_lo), b=(b_hi, b_lo), c=(c_hi, c_lo),
        )
    else:
        (r,) = rd.unpack("<B")
        a1 = _unpack_u128(rd)
        b1 = _unpack_u128(rd)
        P, a2, b2, c2 = rd.unpack("<QQQQ")
        g1 = TwoWiseParams(a1, b1, r, _g1_width(n, r))
        g2 = ThreeWiseParams(P, a2, b2, c2, n)
        top = TopHashDescriptor("large", u, u_round_log, n, g1=g1, g2=g2)
    reds = [_unpack_red(rd, k) for _ in range(3)]
    if rd.pos != len(rd.data):
        raise WireFormatError("trailing bytes")
    return Message(u, sigma, n, k, top, *reds)


def message_bit_size(msg: Message) -> int:
    """Size of the message content in bits.

    This is the serialized length minus pure framing (magic, version,
    checksum) and minus the per-stream byte-padding the byte-oriented
    encoding adds to the check-symbol payloads.
    """
    total = len(serialize(msg)) * 8
    padding = 0
    for red in (msg.red_b, msg.red_B, msg.red_beta):
        per_stream = (2 * red.k * red.chunk_bits + 7) // 8
        padding += red.chunk_count * (per_stream * 8 - 2 * red.k * red.chunk_bits)
    return total - _FRAMING_BITS - padding
