"""Acceptance suite: eight end-to-end criteria, one pass/fail line each.

Each criterion is a single test function that prints a summary line
(visible with ``pytest -s`` and in failure output) and asserts the
criterion's condition.
"""

import itertools
import random
import time

import numpy as np
import pytest

from hamsync.digest import (
    SparseString,
    build_fks,
    build_top_hash,
    evaluate_keys,
    hamming_distance,
    round_universe,
    use_small_variant,
)
from hamsync.errors import WireFormatError
from hamsync.fields import PrimeField, QuadExtField
from hamsync.gen import perturb, random_sparse_string
from hamsync.hashing import (
    build_bitselect,
    build_bucket_hash,
    build_det_multshift,
    cube_sum_of_buckets,
)
from hamsync.protocol import (
    assemble_message,
    deserialize,
    message_bit_size,
    receiver_reconcile,
    sender_encode,
    serialize,
)
from hamsync.rs import RsCode

GRID_U = [1 << 16, 1 << 32, 1 << 48]
GRID_SIGMA = [2, 1 << 8, 1 << 16]
GRID_N = [1, 16, 1 << 10, 1 << 16]
GRID_K = [0, 1, 16, 256]
TRIALS = 20


def _report(num: int, name: str, ok: bool, detail: str = "") -> None:
    line = f"[acceptance {num}] {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f" ({detail})"
    print(line)


@pytest.fixture(scope="module")
def grid_results():
    """One sweep of the full acceptance grid, shared by criteria 1-3.

    For each (u, sigma, n, trial) the digest is built once and reused
    across all k.  Records: dict keyed by (u, sigma, n, k, trial) with
    ok flag, per-stage repair counts, and message bit size.
    """
    records = {}
    base_bits = {}
    start = time.perf_counter()
    for u, sigma, n in itertools.product(GRID_U, GRID_SIGMA, GRID_N):
        for trial in range(TRIALS):
            rng = random.Random(f"grid-{u}-{sigma}-{n}-{trial}")
            s = random_sparse_string(u, sigma, n, rng)
            digest = build_fks(s, rng)
            for k in GRID_K:
                d = k
                t = perturb(s, d, rng)
                msg = assemble_message(digest, k)
                wire = serialize(msg)
                stages = {}
                out = receiver_reconcile(
                    t, deserialize(wire),
                    trace=lambda st, m: stages.__setitem__(st, m),
                )
                bits = message_bit_size(msg)
                red_bits = sum(
                    r.bit_size for r in (msg.red_b, msg.red_B, msg.red_beta)
                )
                records[(u, sigma, n, k, trial)] = {
                    "ok": out.same_string(s),
                    "stages": stages,
                    "bits": bits,
                    "red_bits": red_bits,
                }
                if k == 0:
                    base_bits[(u, sigma, n, trial)] = bits
    elapsed = time.perf_counter() - start
    return {"records": records, "base_bits": base_bits, "elapsed": elapsed}


def test_criterion_1_end_to_end_certainty(grid_results):
    records = grid_results["records"]
    failures = [key for key, rec in records.items() if not rec["ok"]]
    ok = not failures
    _report(
        1, "end-to-end certainty",
        ok,
        f"{len(records)} trials, {grid_results['elapsed']:.0f}s"
        + (f", first failure {failures[0]}" if failures else ""),
    )
    assert ok, f"failed cells: {failures[:5]}"


def test_criterion_2_message_size_law(grid_results):
    records = grid_results["records"]
    base_bits = grid_results["base_bits"]
    # exact affinity: adding budget k adds exactly the check-symbol bits
    affine_bad = []
    for (u, sigma, n, k, trial), rec in records.items():
        base = base_bits[(u, sigma, n, trial)]
        base_red = records[(u, sigma, n, 0, trial)]["red_bits"]
        if rec["bits"] != base - base_red + rec["red_bits"]:
            affine_bad.append((u, sigma, n, k, trial))
    # single constant C <= 16 with a 640-bit header allowance
    worst_c, worst_cell = 0.0, None
    for (u, sigma, n, k, trial), rec in records.items():
        if k == 0:
            continue
        denom = k * (
            max((u - 1).bit_length(), 1) + max((sigma - 1).bit_length(), 1)
        )
        c = (rec["bits"] - 640) / denom
        if c > worst_c:
            worst_c, worst_cell = c, (u, sigma, n, k)
    ok = not affine_bad and worst_c <= 16
    _report(
        2, "message-size law",
        ok,
        f"required C={worst_c:.1f} at {worst_cell}, affine violations={len(affine_bad)}",
    )
    assert not affine_bad, f"non-affine cells: {affine_bad[:5]}"
    assert worst_c <= 16, (
        f"message size needs C={worst_c:.1f} > 16 at cell {worst_cell} "
        f"(u, sigma, n, k); fixed header+descriptor content exceeds the "
        f"640-bit allowance at small k"
    )


def test_criterion_3_staged_mismatch_bounds(grid_results):
    records = grid_results["records"]
    bad = []
    for (u, sigma, n, k, trial), rec in records.items():
        d = k
        if any(m > d for m in rec["stages"].values()):
            bad.append(((u, sigma, n, k, trial), rec["stages"]))
    ok = not bad
    _report(3, "staged mismatch bounds", ok, f"{len(records)} trials")
    assert ok, f"stage bound violations: {bad[:5]}"


def test_criterion_4_rs_exhaustive():
    rng = random.Random("rs-exhaustive")
    failures = 0
    # all two-error patterns at n=8, k=2 over GF(16)
    code = RsCode(4, 8, 2)
    for _ in range(50):
        data = np.array([rng.randrange(16) for _ in range(8)], dtype=np.uint64)
        red = code.encode(data)
        for i, j in itertools.combinations(range(8), 2):
            for ei in range(1, 16):
                for ej in range(1, 16):
                    corrupt = data.copy()
                    corrupt[i] ^= np.uint64(ei)
                    corrupt[j] ^= np.uint64(ej)
                    if not np.array_equal(code.correct(corrupt, red), data):
                        failures += 1
    # all single-error patterns at n=15, k=1 over GF(32)
    code1 = RsCode(5, 15, 1)
    for _ in range(50):
        data = np.array([rng.randrange(32) for _ in range(15)], dtype=np.uint64)
        red = code1.encode(data)
        for i in range(15):
            for e in range(1, 32):
                corrupt = data.copy()
                corrupt[i] ^= np.uint64(e)
                if not np.array_equal(code1.correct(corrupt, red), data):
                    failures += 1
    ok = failures == 0
    _report(4, "RS codec exhaustive oracle", ok, f"{failures} failures")
    assert ok


def test_criterion_5_hash_family_contracts():
    rng = random.Random("hash-contracts")
    # accepted top-hash builds satisfy the verified conditions
    cond_bad = 0
    for _ in range(300):
        n = rng.choice([16, 64, 256, 1024])
        u = n * rng.choice([1 << 8, 1 << 16, 1 << 24])
        keys = rng.sample(range(u), n)
        top = build_top_hash(keys, u, n, rng)
        ki = evaluate_keys(top, sorted(keys))
        if len(set(int(v) for v in ki.img)) != n:
            cond_bad += 1
        sizes = np.bincount(ki.f1, minlength=n)
        if cube_sum_of_buckets(sizes) > 32 * n:
            cond_bad += 1
    # deterministic constructions injective on fuzzed sets
    inj_bad = 0
    for _ in range(10_000):
        r = rng.randrange(4, 21)
        m = rng.randrange(1, min(17, (1 << r) + 1))
        keys = sorted(rng.sample(range(1 << r), m))
        if rng.random() < 0.5:
            s = 2 * max((m - 1).bit_length(), 1) + 2
            dms = build_det_multshift(keys, r, s)
            imgs = {dms.eval_one(x) for x in keys}
        else:
            bs = build_bitselect(keys, r)
            imgs = {bs.eval_one(x) for x in keys}
        if len(imgs) != m:
            inj_bad += 1
    # sender/receiver descriptor agreement on shared bucket sets
    agree_bad = 0
    for _ in range(1000):
        r = rng.randrange(4, 30)
        m = rng.randrange(0, 40)
        keys = sorted(rng.sample(range(1 << r), min(m, 1 << r)))
        n = rng.randrange(max(1, len(keys)), 4 * max(1, len(keys)))
        d1 = build_bucket_hash(keys, n, r)
        shuffled = keys[:]
        rng.shuffle(shuffled)
        d2 = build_bucket_hash(shuffled, n, r)
        if d1 != d2:
            agree_bad += 1
    ok = cond_bad == 0 and inj_bad == 0 and agree_bad == 0
    _report(
        5, "hash-family contracts", ok,
        f"conditions={cond_bad} injectivity={inj_bad} agreement={agree_bad} bad",
    )
    assert ok


def test_criterion_6_las_vegas_behavior():
    n, u, sigma = 1024, 1 << 32, 256
    total_rounds = 0
    wrong = 0
    for trial in range(1000):
        rng = random.Random(f"lv-{trial}")
        s = random_sparse_string(u, sigma, n, rng)
        digest = build_fks(s, rng)
        total_rounds += digest.top.rounds
        msg = assemble_message(digest, 0)
        if not receiver_reconcile(s, msg).same_string(s):
            wrong += 1
    mean_rounds = total_rounds / 1000
    ok = mean_rounds <= 4 and wrong == 0
    _report(
        6, "Las Vegas behavior", ok,
        f"mean rounds {mean_rounds:.2f}, incorrect digests {wrong}",
    )
    assert ok


def test_criterion_7_quotient_variant():
    rng = random.Random("quotient")
    # fuzzed small-universe digests: per-key reconstruction is exact
    bad = 0
    for _ in range(1000):
        n = rng.randrange(2, 400)
        while True:
            u = rng.randrange(2, int(n**1.5) + 1)
            if use_small_variant(round_universe(u)[0], n):
                break
        sigma = rng.choice([2, 16, 256])
        s = random_sparse_string(u, sigma, min(n, u), rng)
        digest = build_fks(s, rng)
        assert digest.top.variant == "small"
        msg = assemble_message(digest, 0)
        if not receiver_reconcile(s, msg).same_string(s):
            bad += 1
    # exhaustive extension-field checks at tiny q
    field_bad = 0
    for q in (3, 5, 7, 11):
        base = PrimeField(q)
        ext = QuadExtField(base)
        els = [(h, l) for h in range(q) for l in range(q)]
        # commutativity/identity over all pairs; associativity/distributivity
        # exhaustively for q <= 5, sampled otherwise
        for x in els:
            for y in els:
                if ext.mul(x, y) != ext.mul(y, x) or ext.add(x, y) != ext.add(y, x):
                    field_bad += 1
            if ext.mul(x, (0, 1)) != x or ext.add(x, (0, 0)) != x:
                field_bad += 1
            if x != (0, 0):
                if ext.mul(x, ext.inv(x)) != (0, 1):
                    field_bad += 1
        triples = (
            itertools.product(els, repeat=3)
            if q <= 5
            else ([tuple(rng.choice(els) for _ in range(3)) for _ in range(10_000)])
        )
        for x, y, z in triples:
            if ext.mul(x, ext.mul(y, z)) != ext.mul(ext.mul(x, y), z):
                field_bad += 1
            if ext.mul(x, ext.add(y, z)) != ext.add(ext.mul(x, y), ext.mul(x, z)):
                field_bad += 1
        # sqrt and quadratic solver vs brute force
        squares = {}
        for y in els:
            squares.setdefault(ext.mul(y, y), set()).add(y)
        for x in els:
            got = ext.sqrt(x)
            want = squares.get(x)
            if want is None:
                if got is not None:
                    field_bad += 1
            elif got is None or set(got) != want:
                field_bad += 1
        for _ in range(200):
            a = ext.of_int(rng.randrange(1, q * q))
            b = ext.of_int(rng.randrange(q * q))
            c = ext.of_int(rng.randrange(q * q))
            v = ext.of_int(rng.randrange(q * q))
            brute = sorted(
                (x for x in els
                 if ext.add(ext.add(ext.mul(a, ext.mul(x, x)), ext.mul(b, x)), c) == v),
                key=ext.to_int,
            )
            got = ext.solve_quadratic(a, b, c, v)
            if got is None:
                if brute:
                    field_bad += 1
            elif sorted(set(got), key=ext.to_int) != brute:
                field_bad += 1
    ok = bad == 0 and field_bad == 0
    _report(
        7, "quotient-variant round trip", ok,
        f"digest failures={bad}, field discrepancies={field_bad}",
    )
    assert ok


def test_criterion_8_wire_format():
    rng = random.Random("wire")
    bad_rt = 0
    for _ in range(10_000):
        u = 1 << rng.randrange(1, 50)
        sigma = rng.choice([2, 3, 256, 1 << 16])
        n = rng.randrange(0, 25)
        k = rng.choice([0, 1, 2, 5])
        s = random_sparse_string(u, sigma, min(n, u), rng)
        msg = sender_encode(s, k, rng)
        blob = serialize(msg)
        if serialize(deserialize(blob)) != blob:
            bad_rt += 1
    # every 1-byte corruption of a valid frame is rejected
    s = random_sparse_string(1 << 20, 16, 20, rng)
    blob = serialize(sender_encode(s, 2, rng))
    silent = 0
    for i in range(len(blob)):
        for delta in range(1, 256):
            corrupted = bytearray(blob)
            corrupted[i] ^= delta
            try:
                deserialize(bytes(corrupted))
            except WireFormatError:
                continue
            silent += 1
    ok = bad_rt == 0 and silent == 0
    _report(
        8, "wire format", ok,
        f"round-trip failures={bad_rt}, silent acceptances={silent}",
    )
    assert ok
