"""Random test-instance generation: sparse strings and planted edits."""

from __future__ import annotations

import random

from .digest import SparseString


def random_sparse_string(u: int, sigma: int, n: int, rng: random.Random) -> SparseString:
    """Uniform sparse string with exactly n non-zeros."""
    if not 0 <= n <= u:
        raise ValueError("need 0 <= n <= u")
    if sigma < 2:
        raise ValueError("need sigma >= 2")
    positions = rng.sample(range(u), n)
    pairs = [(x, rng.randrange(1, sigma)) for x in positions]
    return SparseString(u, sigma, pairs)


def perturb(s: SparseString, d: int, rng: random.Random) -> SparseString:
    """A string at dense Hamming distance exactly d from s.

    Each edited position is changed exactly once (value change, removal,
    or addition), so the planted distance is tight.
    """
    if not 0 <= d <= s.u:
        raise ValueError("need 0 <= d <= u")
    here = s.as_dict()
    targets = rng.sample(range(s.u), d)
    out = dict(here)
    for x in targets:
        old = here.get(x, 0)
        if old == 0:
            out[x] = rng.randrange(1, s.sigma)
        elif s.sigma > 2 and rng.random() < 0.5:
            new = rng.randrange(1, s.sigma - 1)
            out[x] = new + 1 if new >= old else new
        else:
            del out[x]
    return SparseString(s.u, s.sigma, sorted(out.items()))
