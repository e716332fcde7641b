"""Command-line front end: gen, encode, reconcile, verify, bench.

Sparse strings travel as text files ("kv files"): a header line
``u=<u> sigma=<sigma>`` followed by one ``<position> <value>`` pair per
line in decimal, any order.  Digests are binary (their size is the
quantity the protocol minimizes).

Exit codes: 0 success, 1 strings differ (verify), 2 usage or parse
error, 3 parameter overflow, 4 uncorrectable.
"""

from __future__ import annotations

import argparse
import csv
import random
import sys
import time
from dataclasses import dataclass

from .digest import SparseString, hamming_distance
from .errors import (
    ParameterOverflowError,
    UncorrectableError,
    WireFormatError,
)
from .gen import perturb, random_sparse_string
from .protocol import (
    deserialize,
    message_bit_size,
    receiver_reconcile,
    sender_encode,
    serialize,
)

EXIT_OK = 0
EXIT_DIFFER = 1
EXIT_USAGE = 2
EXIT_OVERFLOW = 3
EXIT_UNCORRECTABLE = 4


class KvFileError(ValueError):
    pass


def parse_kv_text(text: str) -> SparseString:
    """Parse the text sparse-string format; raises KvFileError."""
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise KvFileError("missing header line")
    fields = dict(
        part.split("=", 1) for part in lines[0].split() if "=" in part
    )
    try:
        u = int(fields["u"])
        sigma = int(fields["sigma"])
    except (KeyError, ValueError) as exc:
        raise KvFileError(f"bad header {lines[0]!r}") from exc
    pairs = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise KvFileError(f"bad pair line {ln!r}")
        try:
            pairs.append((int(parts[0]), int(parts[1])))
        except ValueError as exc:
            raise KvFileError(f"bad pair line {ln!r}") from exc
    s = SparseString(u, sigma, pairs)
    try:
        s.validate()
    except ValueError as exc:
        raise KvFileError(str(exc)) from exc
    return s


def format_kv_text(s: SparseString) -> str:
    lines = [f"u={s.u} sigma={s.sigma}"]
    lines += [f"{x} {c}" for x, c in sorted(s.pairs)]
    return "\n".join(lines) + "\n"


def read_kv_file(path: str) -> SparseString:
    with open(path, "r", encoding="ascii") as fh:
        return parse_kv_text(fh.read())


def write_kv_file(path: str, s: SparseString) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(format_kv_text(s))


@dataclass
class BenchRecord:
    u: int
    sigma: int
    n: int
    k: int
    seed: int
    message_bits: int
    encode_ms: float
    reconcile_ms: float
    ok: bool


BENCH_COLUMNS = [
    "u", "sigma", "n", "k", "seed",
    "message_bits", "encode_ms", "reconcile_ms", "ok",
]


# ---------------------------------------------------------------------------
# commands

def cmd_gen(args) -> int:
    if not (
        args.sigma >= 2
        and 0 <= args.n <= args.u
        and 0 <= args.d <= args.k <= args.u
    ):
        print("gen: invalid parameter combination", file=sys.stderr)
        return EXIT_USAGE
    rng = random.Random(args.seed)
    s = random_sparse_string(args.u, args.sigma, args.n, rng)
    t = perturb(s, args.d, rng)
    write_kv_file(args.out_s, s)
    write_kv_file(args.out_t, t)
    return EXIT_OK


def cmd_encode(args) -> int:
    s = read_kv_file(args.in_s)
    msg = sender_encode(s, args.k, random.Random(args.seed))
    blob = serialize(msg)
    with open(args.out, "wb") as fh:
        fh.write(blob)
    print(f"n={msg.n}")
    print(f"variant={msg.top.variant}")
    print(f"message_bits={message_bit_size(msg)}")
    return EXIT_OK


def cmd_reconcile(args) -> int:
    t = read_kv_file(args.in_t)
    with open(args.digest, "rb") as fh:
        msg = deserialize(fh.read())
    s = receiver_reconcile(t, msg)
    write_kv_file(args.out, s)
    return EXIT_OK


def cmd_verify(args) -> int:
    a = read_kv_file(args.a)
    b = read_kv_file(args.b)
    if a.u != b.u or a.sigma != b.sigma:
        print("verify: mismatched headers", file=sys.stderr)
        return EXIT_USAGE
    d = hamming_distance(a, b)
    if d == 0:
        return EXIT_OK
    print(d)
    return EXIT_DIFFER


def _parse_grid(text: str) -> list[int]:
    try:
        values = [int(part, 0) for part in text.split(",") if part]
    except ValueError as exc:
        raise KvFileError(f"bad grid list {text!r}") from exc
    if not values:
        raise KvFileError(f"empty grid list {text!r}")
    return values


def cmd_bench(args) -> int:
    us = _parse_grid(args.u)
    sigmas = _parse_grid(args.sigma)
    ns = _parse_grid(args.n)
    ks = _parse_grid(args.k)
    records: list[BenchRecord] = []
    worst = 0.0
    for u in us:
        for sigma in sigmas:
            for n in ns:
                if n > u:
                    continue
                for k in ks:
                    for trial in range(args.trials):
                        seed = args.seed * 1_000_003 + trial
                        rng = random.Random(seed)
                        s = random_sparse_string(u, sigma, n, rng)
                        t = perturb(s, min(k, u), rng)
                        t0 = time.perf_counter()
                        msg = sender_encode(s, k, rng)
                        blob = serialize(msg)
                        t1 = time.perf_counter()
                        out = receiver_reconcile(t, deserialize(blob))
                        t2 = time.perf_counter()
                        ok = out.same_string(s)
                        bits = message_bit_size(msg)
                        records.append(
                            BenchRecord(
                                u, sigma, n, k, seed, bits,
                                (t1 - t0) * 1e3, (t2 - t1) * 1e3, ok,
                            )
                        )
                        if not ok:
                            _write_bench_csv(args.out, records)
                            print(
                                f"bench: reconciliation failed at u={u} "
                                f"sigma={sigma} n={n} k={k} seed={seed}",
                                file=sys.stderr,
                            )
                            return EXIT_UNCORRECTABLE
                        if k >= 1:
                            denom = k * (
                                max((u - 1).bit_length(), 1)
                                + max((sigma - 1).bit_length(), 1)
                            )
                            worst = max(worst, bits / denom)
    _write_bench_csv(args.out, records)
    print(f"records={len(records)}")
    print(f"max_bits_per_k_logu_logsigma={worst:.3f}")
    return EXIT_OK


def _write_bench_csv(path: str, records: list[BenchRecord]) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(BENCH_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.u, r.sigma, r.n, r.k, r.seed, r.message_bits,
                    f"{r.encode_ms:.3f}", f"{r.reconcile_ms:.3f}",
                    "true" if r.ok else "false",
                ]
            )


# ---------------------------------------------------------------------------
# argument parsing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hamsync",
        description="One-way sparse-string reconciliation under Hamming distance.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a random instance (s, t) pair")
    p.add_argument("--u", type=int, required=True, help="universe size")
    p.add_argument("--sigma", type=int, required=True, help="alphabet size")
    p.add_argument("--n", type=int, required=True, help="non-zeros in s")
    p.add_argument("--k", type=int, required=True, help="distance budget")
    p.add_argument("--d", type=int, required=True, help="planted distance (<= k)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-s", required=True, help="output path for s")
    p.add_argument("--out-t", required=True, help="output path for t")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("encode", help="serialize a digest of s")
    p.add_argument("in_s", help="kv file holding s")
    p.add_argument("--k", type=int, required=True, help="distance budget")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", "-o", required=True, help="output digest path")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("reconcile", help="recover s from t and a digest")
    p.add_argument("in_t", help="kv file holding t")
    p.add_argument("digest", help="binary digest file")
    p.add_argument("--out", "-o", required=True, help="output path for recovered s")
    p.set_defaults(func=cmd_reconcile)

    p = sub.add_parser("verify", help="compare two kv files")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="sweep a grid; write CSV of measurements")
    p.add_argument("--u", required=True, help="comma-separated universe sizes")
    p.add_argument("--sigma", required=True, help="comma-separated alphabet sizes")
    p.add_argument("--n", required=True, help="comma-separated support sizes")
    p.add_argument("--k", required=True, help="comma-separated budgets")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", "-o", required=True, help="output CSV path")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (KvFileError, WireFormatError, OSError) as exc:
        print(f"hamsync: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParameterOverflowError as exc:
        print(f"hamsync: {exc}", file=sys.stderr)
        return EXIT_OVERFLOW
    except UncorrectableError as exc:
        print(f"hamsync: {exc}", file=sys.stderr)
        return EXIT_UNCORRECTABLE


if __name__ == "__main__":
    sys.exit(main())
