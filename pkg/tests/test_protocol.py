"""End-to-end protocol and wire-format tests."""

import random

import pytest

from hamsync.digest import SparseString, build_fks, hamming_distance
from hamsync.errors import WireFormatError
from hamsync.gen import perturb, random_sparse_string
from hamsync.protocol import (
    assemble_message,
    deserialize,
    message_bit_size,
    receiver_reconcile,
    sender_encode,
    serialize,
)


def test_reconcile_identity():
    rng = random.Random(0)
    s = random_sparse_string(1 << 24, 64, 300, rng)
    msg = sender_encode(s, 4, rng)
    out = receiver_reconcile(s, msg)
    assert out.same_string(s)


def test_reconcile_fuzz_both_variants():
    rng = random.Random(1)
    cases = [
        (1 << 32, 256, 200, 6),  # large variant
        (1 << 32, 2, 500, 10),
        (1 << 12, 16, 400, 8),  # small variant
        (1 << 16, 256, 2000, 16),
    ]
    for u, sigma, n, k in cases:
        s = random_sparse_string(u, sigma, n, rng)
        msg = sender_encode(s, k, rng)
        for d in (0, 1, k):
            t = perturb(s, d, rng)
            assert hamming_distance(s, t) == d
            out = receiver_reconcile(t, msg)
            assert out.same_string(s), (u, sigma, n, k, d)


def test_reconcile_k_zero():
    rng = random.Random(2)
    s = random_sparse_string(1 << 20, 8, 100, rng)
    msg = sender_encode(s, 0, rng)
    assert receiver_reconcile(s, msg).same_string(s)


def test_reconcile_empty_sender():
    rng = random.Random(3)
    s = SparseString(1 << 16, 4, [])
    t = perturb(s, 3, rng)
    msg = sender_encode(s, 3, rng)
    assert receiver_reconcile(t, msg).same_string(s)


def test_reconcile_trace_bounds():
    rng = random.Random(4)
    s = random_sparse_string(1 << 28, 32, 600, rng)
    d = 9
    t = perturb(s, d, rng)
    msg = sender_encode(s, d, rng)
    seen = {}
    out = receiver_reconcile(t, msg, trace=lambda stage, m: seen.__setitem__(stage, m))
    assert out.same_string(s)
    assert set(seen) == {"b", "B", "beta"}
    assert all(0 <= m <= d for m in seen.values())


def test_parameter_mismatch_rejected():
    rng = random.Random(5)
    s = random_sparse_string(1 << 16, 8, 50, rng)
    msg = sender_encode(s, 2, rng)
    with pytest.raises(ValueError):
        receiver_reconcile(SparseString(1 << 17, 8, []), msg)


def test_wire_round_trip_fuzz():
    rng = random.Random(6)
    for _ in range(25):
        u = 1 << rng.randrange(4, 40)
        sigma = rng.choice([2, 7, 256, 1 << 16])
        n = rng.randrange(0, 300)
        k = rng.choice([0, 1, 5, 32])
        s = random_sparse_string(u, sigma, min(n, u), rng)
        msg = sender_encode(s, k, rng)
        blob = serialize(msg)
        back = deserialize(blob)
        assert serialize(back) == blob
        t = perturb(s, min(k, 3), rng)
        assert receiver_reconcile(t, back).same_string(s)


def test_wire_rejects_corruption():
    rng = random.Random(7)
    s = random_sparse_string(1 << 20, 16, 40, rng)
    blob = serialize(sender_encode(s, 2, rng))
    with pytest.raises(WireFormatError, match="bad magic"):
        deserialize(b"XXXX" + blob[4:])
    with pytest.raises(WireFormatError):
        deserialize(blob[: len(blob) // 2])
    # a short body with a valid checksum hits the truncation check itself
    import struct, zlib

    body = blob[: len(blob) // 2]
    with pytest.raises(WireFormatError, match="truncated"):
        deserialize(body + struct.pack("<I", zlib.crc32(body)))
    for i in range(len(blob)):
        bad = bytearray(blob)
        bad[i] ^= 0x40
        with pytest.raises(WireFormatError):
            deserialize(bytes(bad))


def test_wire_rejects_version_and_trailing():
    rng = random.Random(8)
    s = random_sparse_string(1 << 16, 4, 10, rng)
    blob = serialize(sender_encode(s, 1, rng))
    import struct, zlib

    body = bytearray(blob[:-4])
    struct.pack_into("<H", body, 4, 99)
    bad = bytes(body) + struct.pack("<I", zlib.crc32(bytes(body)))
    with pytest.raises(WireFormatError, match="version"):
        deserialize(bad)
    body = blob[:-4] + b"\x00"
    bad = body + struct.pack("<I", zlib.crc32(body))
    with pytest.raises(WireFormatError, match="trailing"):
        deserialize(bad)


def test_message_bit_size_accounting():
    rng = random.Random(9)
    s = random_sparse_string(1 << 24, 256, 200, rng)
    digest = build_fks(s, rng)
    msg = assemble_message(digest, 5)
    bits = message_bit_size(msg)
    red_bits = sum(r.bit_size for r in (msg.red_b, msg.red_B, msg.red_beta))
    assert bits < len(serialize(msg)) * 8
    # content = header + top block + redundancy descriptors + check bits
    assert bits >= red_bits
    # redundancy grows linearly in k while the rest stays fixed
    base = message_bit_size(assemble_message(digest, 0))
    for k in (1, 3, 8):
        m = assemble_message(digest, k)
        extra = sum(r.bit_size for r in (m.red_b, m.red_B, m.red_beta))
        assert message_bit_size(m) == base + extra


def test_reproducible_from_seed():
    s = random_sparse_string(1 << 20, 8, 150, random.Random(42))
    blob1 = serialize(sender_encode(s, 3, random.Random(7)))
    blob2 = serialize(sender_encode(s, 3, random.Random(7)))
    assert blob1 == blob2
