"""Tests for prime field and quadratic extension arithmetic."""

import random

import pytest

from hamsync.errors import NoPrimeError
from hamsync.fields import (
    PrimeField,
    QuadExtField,
    find_prime_in,
    find_qnr,
    fq2_to_int,
    int_to_fq2,
    is_prime,
    next_prime_at_least,
)


def trial_division_is_prime(x: int) -> bool:
    """Independent primality oracle."""
    if x < 2:
        return False
    d = 2
    while d * d <= x:
        if x % d == 0:
            return False
        d += 1
    return True


def test_is_prime_small_exhaustive():
    for x in range(2000):
        assert is_prime(x) == trial_division_is_prime(x), x


def test_is_prime_known_values():
    assert is_prime(1000003)
    assert trial_division_is_prime(1000003)
    assert not is_prime(1000001)  # 101 * 9901
    assert is_prime((1 << 61) - 1)  # Mersenne prime
    assert not is_prime((1 << 32) + 1)  # 641 * 6700417


def test_find_prime_in_basic():
    rng = random.Random(0)
    for lo, hi in [(2, 2), (10, 20), (1 << 20, (1 << 20) + 100), (4 * 961, 8 * 961)]:
        p = find_prime_in(lo, hi, rng)
        assert lo <= p <= hi
        assert trial_division_is_prime(p)


def test_find_prime_in_empty_interval():
    rng = random.Random(0)
    with pytest.raises(NoPrimeError):
        find_prime_in(24, 28, rng)  # 24..28 are all composite
    with pytest.raises(NoPrimeError):
        find_prime_in(10, 5, rng)


def test_next_prime_at_least():
    assert next_prime_at_least(0) == 2
    assert next_prime_at_least(14) == 17
    assert next_prime_at_least(17) == 17
    assert next_prime_at_least(1 << 16) == 65537


def test_prime_field_inv_known_value():
    f = PrimeField(13)
    assert f.inv(5) == 8  # 5 * 8 = 40 = 3 * 13 + 1
    for a in range(1, 13):
        assert f.mul(a, f.inv(a)) == 1


def test_prime_field_inv_zero_raises():
    f = PrimeField(13)
    with pytest.raises(ZeroDivisionError):
        f.inv(0)


def test_prime_field_rejects_composite():
    with pytest.raises(ValueError):
        PrimeField(15)


def test_prime_field_sqrt_known_values():
    f = PrimeField(7)
    assert f.sqrt(2) == (3, 4)  # 3^2 = 9 = 2, 4^2 = 16 = 2
    assert f.sqrt(3) is None  # 3 is a non-residue mod 7
    assert f.sqrt(0) == (0, 0)


def test_find_qnr_known_values():
    assert find_qnr(PrimeField(7)) == 3
    assert find_qnr(PrimeField(5)) == 2


def test_prime_field_tables_match_naive():
    for q in (3, 5, 7, 11, 13, 101):
        f = PrimeField(q)
        for a in range(1, q):
            # inverse oracle: exhaustive search
            inv = next(b for b in range(1, q) if a * b % q == 1)
            assert f.inv(a) == inv
        for a in range(q):
            roots = sorted(r for r in range(q) if r * r % q == a)
            got = f.sqrt(a)
            if not roots:
                assert got is None
            elif a == 0:
                assert got == (0, 0)
            else:
                assert got == (roots[0], roots[-1])


def test_prime_field_large_modulus_paths():
    # Both Tonelli-Shanks branches: q = 3 mod 4 and q = 1 mod 4,
    # above the lookup-table limit.
    rng = random.Random(7)
    q3 = next_prime_at_least(1 << 20)
    while q3 % 4 != 3:
        q3 = next_prime_at_least(q3 + 1)
    q1 = next_prime_at_least(1 << 20)
    while q1 % 4 != 1:
        q1 = next_prime_at_least(q1 + 1)
    for q in (q3, q1):
        f = PrimeField(q)
        for _ in range(50):
            a = rng.randrange(1, q)
            got = f.sqrt(a * a % q)
            assert got is not None
            lo, hi = got
            assert lo * lo % q == a * a % q and hi == q - lo
            assert f.mul(a, f.inv(a)) == 1


def test_int_fq2_round_trip():
    q = 7
    for x in range(q * q):
        assert fq2_to_int(q, int_to_fq2(q, x)) == x
    with pytest.raises(ValueError):
        int_to_fq2(q, q * q)
    with pytest.raises(ValueError):
        int_to_fq2(q, -1)


def test_quad_ext_known_values():
    ext = QuadExtField(PrimeField(7))
    assert ext.A == 3
    g = (1, 0)
    assert ext.mul(g, g) == (0, 3)  # g^2 = A
    assert ext.inv(g) == (5, 0)  # g * 5g = 5 * 3 = 15 = 1 mod 7
    assert ext.sqrt((0, 3)) == ((1, 0), (6, 0))  # roots of A are +-g


def test_quad_ext_rejects_residue_A():
    with pytest.raises(ValueError):
        QuadExtField(PrimeField(7), A=2)  # 2 = 3^2 mod 7


def test_quad_ext_mul_matches_polynomial_oracle():
    q = 11
    ext = QuadExtField(PrimeField(q))
    A = ext.A
    rng = random.Random(1)
    for _ in range(300):
        a = (rng.randrange(q), rng.randrange(q))
        b = (rng.randrange(q), rng.randrange(q))
        # multiply (a0 x + a1)(b0 x + b1) then reduce x^2 -> A
        c2 = a[0] * b[0]
        c1 = a[0] * b[1] + a[1] * b[0]
        c0 = a[1] * b[1]
        assert ext.mul(a, b) == (c1 % q, (c0 + A * c2) % q)


def test_quad_ext_field_axioms_exhaustive():
    q = 5
    ext = QuadExtField(PrimeField(q))
    elems = [ext.of_int(x) for x in range(q * q)]
    for a in elems:
        if a != (0, 0):
            assert ext.mul(a, ext.inv(a)) == (0, 1)
        assert ext.add(a, ext.neg(a)) == (0, 0)
    # multiplicative group has order q^2 - 1
    g = (1, 1)
    assert ext.pow(g, q * q - 1) == (0, 1)


def test_quad_ext_sqrt_exhaustive():
    for q in (5, 7, 13):
        ext = QuadExtField(PrimeField(q))
        elems = [ext.of_int(x) for x in range(q * q)]
        squares = {}
        for e in elems:
            squares.setdefault(ext.mul(e, e), []).append(ext.to_int(e))
        for e in elems:
            got = ext.sqrt(e)
            if e not in squares:
                assert got is None
            else:
                roots = sorted(squares[e])
                assert got == (ext.of_int(roots[0]), ext.of_int(roots[-1]))


def test_solve_quadratic_known_value():
    ext = QuadExtField(PrimeField(7))
    one = (0, 1)
    # X^2 + X = 2 factors as (X - 1)(X + 2) = 0, roots 1 and 5
    assert ext.solve_quadratic(one, one, (0, 0), (0, 2)) == ((0, 1), (0, 5))


def test_solve_quadratic_matches_exhaustive_search():
    q = 5
    ext = QuadExtField(PrimeField(q))
    elems = [ext.of_int(x) for x in range(q * q)]
    rng = random.Random(2)
    for _ in range(200):
        a = ext.of_int(rng.randrange(1, q * q))
        b = elems[rng.randrange(q * q)]
        c = elems[rng.randrange(q * q)]
        v = elems[rng.randrange(q * q)]
        expect = sorted(
            ext.to_int(x)
            for x in elems
            if ext.add(ext.add(ext.mul(a, ext.mul(x, x)), ext.mul(b, x)), c) == v
        )
        got = ext.solve_quadratic(a, b, c, v)
        if not expect:
            assert got is None
        elif len(expect) == 1:
            assert got == (ext.of_int(expect[0]), ext.of_int(expect[0]))
        else:
            assert got == (ext.of_int(expect[0]), ext.of_int(expect[1]))


def test_other_root():
    q = 13
    ext = QuadExtField(PrimeField(q))
    rng = random.Random(3)
    for _ in range(100):
        a = ext.of_int(rng.randrange(1, q * q))
        b = ext.of_int(rng.randrange(q * q))
        c = ext.of_int(rng.randrange(q * q))
        x = ext.of_int(rng.randrange(q * q))
        v = ext.add(ext.add(ext.mul(a, ext.mul(x, x)), ext.mul(b, x)), c)
        y = ext.other_root(a, b, x)
        vy = ext.add(ext.add(ext.mul(a, ext.mul(y, y)), ext.mul(b, y)), c)
        assert vy == v
