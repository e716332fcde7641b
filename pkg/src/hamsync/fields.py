"""Prime fields F_q and their quadratic extensions F_{q^2}.

Elements of F_q are plain ints in [0, q).  Elements of F_{q^2} are
(hi, lo) tuples representing hi*g + lo where g^2 = A for a quadratic
non-residue A; the integer encoding hi*q + lo is a bijection with [q^2].
"""

from __future__ import annotations

import random

import numpy as np

from .errors import NoPrimeError

# Deterministic Miller-Rabin witness set, proven sufficient for all
# inputs below 3.3 * 10^24 (covers the full 64-bit range).
_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)

# Below this modulus, inverse and square-root lookup tables are built;
# above it, extended-Euclid / Tonelli-Shanks are used instead.
TABLE_LIMIT = 1 << 20


def is_prime(x: int) -> bool:
    """Deterministic primality test for machine-word-sized naturals."""
    if x < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if x == p:
            return True
        if x % p == 0:
            return False
    d = x - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_WITNESSES:
        y = pow(a, d, x)
        if y == 1 or y == x - 1:
            continue
        for _ in range(r - 1):
            y = y * y % x
            if y == x - 1:
                break
        else:
            return False
    return True


def find_prime_in(lo: int, hi: int, rng: random.Random) -> int:
    """Find a prime in [lo, hi] by random trials with an exhaustive fallback.

    Las Vegas: the result is always prime; only the trial count is random.
    Raises NoPrimeError if the interval contains no prime at all.
    """
    if lo > hi:
        raise NoPrimeError("no prime found: empty interval")
    lo = max(lo, 2)
    width = hi - lo + 1
    budget = 64 * max(hi.bit_length(), 1)
    for _ in range(budget):
        cand = rng.randrange(lo, hi + 1)
        if is_prime(cand):
            return cand
    for cand in range(lo, hi + 1):
        if is_prime(cand):
            return cand
    raise NoPrimeError(f"no prime found in [{lo}, {hi}] ({width} candidates)")


def next_prime_at_least(lo: int) -> int:
    """Smallest prime >= lo (deterministic scan)."""
    cand = max(lo, 2)
    while not is_prime(cand):
        cand += 1
    return cand


class PrimeField:
    """Arithmetic mod a prime q, with lookup tables at small sizes."""

    def __init__(self, q: int):
        if not is_prime(q):
            raise ValueError(f"modulus {q} is not prime")
        self.q = q
        self._inv_table: np.ndarray | None = None
        self._sqrt_table: np.ndarray | None = None
        if q < TABLE_LIMIT:
            self._build_tables()

    def _build_tables(self) -> None:
        q = self.q
        # inv[i] = -(q // i) * inv[q % i], the standard linear recurrence.
        inv = np.zeros(q, dtype=np.int64)
        if q > 1:
            inv[1] = 1
        for i in range(2, q):
            inv[i] = (q - (q // i) * inv[q % i]) % q
        # sqrt table via a single forward scan; entry q means "no root".
        sq = np.full(q, q, dtype=np.int64)
        for x in range((q + 1) // 2 + 1):
            v = x * x % q
            if sq[v] == q:
                sq[v] = x
        self._inv_table = inv
        self._sqrt_table = sq

    @property
    def inv_table(self) -> np.ndarray:
        if self._inv_table is None:
            raise ValueError(f"modulus {self.q} too large for lookup tables")
        return self._inv_table

    @property
    def sqrt_table(self) -> np.ndarray:
        if self._sqrt_table is None:
            raise ValueError(f"modulus {self.q} too large for lookup tables")
        return self._sqrt_table

    def add(self, a: int, b: int) -> int:
        return (a + b) % self.q

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.q

    def mul(self, a: int, b: int) -> int:
        return a * b % self.q

    def neg(self, a: int) -> int:
        return -a % self.q

    def inv(self, a: int) -> int:
        if a % self.q == 0:
            raise ZeroDivisionError("zero has no inverse")
        if self._inv_table is not None:
            return int(self._inv_table[a % self.q])
        return pow(a, -1, self.q)

    def pow(self, a: int, e: int) -> int:
        return pow(a, e, self.q)

    def is_qr(self, a: int) -> bool:
        """True iff a has a square root mod q (0 counts as a residue)."""
        a %= self.q
        if a == 0:
            return True
        if self._sqrt_table is not None:
            return int(self._sqrt_table[a]) < self.q
        return pow(a, (self.q - 1) // 2, self.q) == 1

    def sqrt_min(self, a: int) -> int | None:
        """The root r with r <= q - r, or None for a non-residue."""
        q = self.q
        a %= q
        if a == 0:
            return 0
        if self._sqrt_table is not None:
            r = int(self._sqrt_table[a])
            return None if r == q else r
        if pow(a, (q - 1) // 2, q) != 1:
            return None
        r = self._tonelli_shanks(a)
        return min(r, q - r)

    def sqrt(self, a: int) -> tuple[int, int] | None:
        """Both roots (r, q - r) with r <= q - r; (0, 0) for zero; None if no root."""
        r = self.sqrt_min(a)
        if r is None:
            return None
        if r == 0:
            return (0, 0)
        return (r, self.q - r)

    def _tonelli_shanks(self, a: int) -> int:
        q = self.q
        if q % 4 == 3:
            return pow(a, (q + 1) // 4, q)
        # Write q - 1 = s * 2^e with s odd.
        s, e = q - 1, 0
        while s % 2 == 0:
            s //= 2
            e += 1
        z = find_qnr(self)
        c = pow(z, s, q)
        x = pow(a, (s + 1) // 2, q)
        t = pow(a, s, q)
        m = e
        while t != 1:
            i, t2 = 0, t
            while t2 != 1:
                t2 = t2 * t2 % q
                i += 1
            b = pow(c, 1 << (m - i - 1), q)
            x = x * b % q
            c = b * b % q
            t = t * c % q
            m = i
        return x

    def __repr__(self) -> str:
        return f"PrimeField({self.q})"


def find_qnr(field: PrimeField) -> int:
    """Smallest quadratic non-residue A >= 2 of an odd prime field.

    Deterministic, so both reconciliation parties derive the same
    extension field from q alone.
    """
    q = field.q
    if q == 2:
        raise ValueError("modulus must be odd prime")
    half = (q - 1) // 2
    for a in range(2, q):
        if pow(a, half, q) == q - 1:
            return a
    raise ValueError(f"no non-residue found mod {q}")  # unreachable for odd prime


def int_to_fq2(q: int, x: int) -> tuple[int, int]:
    """Encode x in [q^2] as the pair (x div q, x mod q)."""
    if not 0 <= x < q * q:
        raise ValueError(f"out of range: {x} not in [0, {q * q})")
    return (x // q, x % q)


def fq2_to_int(q: int, e: tuple[int, int]) -> int:
    """Inverse of int_to_fq2."""
    hi, lo = e
    return hi * q + lo


class QuadExtField:
    """F_{q^2} built as F_q[g] / (g^2 - A) for a non-residue A."""

    def __init__(self, base: PrimeField, A: int | None = None):
        if base.q == 2:
            raise ValueError("modulus must be odd prime")
        self.base = base
        self.q = base.q
        self.A = find_qnr(base) if A is None else A % base.q
        if base.is_qr(self.A):
            raise ValueError(f"{self.A} is a quadratic residue mod {base.q}")

    @property
    def order(self) -> int:
        return self.q * self.q

    def zero(self) -> tuple[int, int]:
        return (0, 0)

    def of_int(self, x: int) -> tuple[int, int]:
        return int_to_fq2(self.q, x)

    def to_int(self, e: tuple[int, int]) -> int:
        return fq2_to_int(self.q, e)

    def add(self, a, b):
        q = self.q
        return ((a[0] + b[0]) % q, (a[1] + b[1]) % q)

    def sub(self, a, b):
        q = self.q
        return ((a[0] - b[0]) % q, (a[1] - b[1]) % q)

    def neg(self, a):
        q = self.q
        return (-a[0] % q, -a[1] % q)

    def mul(self, a, b):
        # (h1 g + l1)(h2 g + l2) = (h1 l2 + h2 l1) g + (l1 l2 + A h1 h2)
        q = self.q
        h1, l1 = a
        h2, l2 = b
        return ((h1 * l2 + h2 * l1) % q, (l1 * l2 + self.A * h1 * h2) % q)

    def scalar_mul(self, c: int, a):
        q = self.q
        return (c * a[0] % q, c * a[1] % q)

    def norm(self, a) -> int:
        """N(a) = a * conj(a) = lo^2 - A * hi^2, an element of F_q."""
        h, l = a
        return (l * l - self.A * h * h) % self.q

    def inv(self, a):
        if a == (0, 0):
            raise ZeroDivisionError("zero has no inverse")
        h, l = a
        ninv = self.base.inv(self.norm(a))
        return (-h * ninv % self.q, l * ninv % self.q)

    def pow(self, a, e: int):
        acc = (0, 1)
        b = a
        while e:
            if e & 1:
                acc = self.mul(acc, b)
            b = self.mul(b, b)
            e >>= 1
        return acc

    def sqrt(self, x) -> tuple[tuple[int, int], tuple[int, int]] | None:
        """Both square roots of x, ordered by integer encoding, or None.

        Uses the norm characterization: nonzero x is a square in F_{q^2}
        iff N(x) is a square in F_q; a root is then assembled from base
        field square roots only.
        """
        base, q, A = self.base, self.q, self.A
        h, l = x
        if h == 0 and l == 0:
            return ((0, 0), (0, 0))
        if h == 0:
            r = base.sqrt_min(l)
            if r is not None:
                root = (0, r)
            else:
                # l and A are both non-residues, so l/A is a residue.
                r = base.sqrt_min(l * base.inv(A) % q)
                root = (r, 0)
        else:
            nr = base.sqrt_min(self.norm(x))
            if nr is None:
                return None
            inv2 = base.inv(2)
            y0 = None
            for cand in ((l + nr) * inv2 % q, (l - nr) * inv2 % q):
                r = base.sqrt_min(cand)
                if r is not None and r != 0:
                    y0 = r
                    break
            if y0 is None:
                return None
            y1 = h * base.inv(2 * y0 % q) % q
            root = (y1, y0)
        other = self.neg(root)
        if self.to_int(root) <= self.to_int(other):
            return (root, other)
        return (other, root)

    def solve_quadratic(self, a, b, c, v) -> tuple[tuple[int, int], tuple[int, int]] | None:
        """Both X with a*X^2 + b*X + c = v, ordered by integer encoding.

        Returns None when the discriminant is a non-residue (no solution);
        both entries are equal at a double root.
        """
        if a == (0, 0):
            raise ValueError("leading coefficient zero")
        disc = self.sub(self.mul(b, b), self.scalar_mul(4, self.mul(a, self.sub(c, v))))
        roots = self.sqrt(disc)
        if roots is None:
            return None
        s = roots[0]
        inv2a = self.inv(self.scalar_mul(2, a))
        nb = self.neg(b)
        x0 = self.mul(self.add(nb, s), inv2a)
        x1 = self.mul(self.sub(nb, s), inv2a)
        if self.to_int(x0) <= self.to_int(x1):
            return (x0, x1)
        return (x1, x0)

    def other_root(self, a, b, x):
        """Given one root x of a*X^2 + b*X + c = v, the other root -b/a - x."""
        return self.sub(self.neg(self.mul(b, self.inv(a))), x)

    def __repr__(self) -> str:
        return f"QuadExtField(q={self.q}, A={self.A})"
