"""Seeded random samples of coefficients, formal functions and Weyl elements."""

from __future__ import annotations

import random

from .weyl import iter_monomials


def random_polynomial(ring, rng, degree=2, terms=3, coeff=3):
    out = ring.zero
    n = ring.dim
    for _ in range(terms):
        d = rng.randint(0, degree)
        e = rng.choice(list(iter_monomials(n, d)))
        m = ring.const(rng.randint(-coeff, coeff))
        for i, k in enumerate(e):
            if k:
                m = m * ring.gen(i) ** k
        out = out + m
    return out


def random_rational(ring, rng, degree=2):
    num = random_polynomial(ring, rng, degree)
    den = random_polynomial(ring, rng, 1, terms=2) + rng.choice([1, 2, 3]) * ring.const(7)
    if den.is_zero() or den.evaluate([0] * ring.dim) == 0:
        den = ring.one
    return num / den


def random_element(alg, rng, *, terms=4, max_fiber=3, max_nu=1, forms=True, rational=False, dega=None):
    """A random element with small total degree; ``dega`` fixes the form degree."""
    ring = alg.ring
    n = alg.dim
    t = {}
    for _ in range(terms):
        nu = rng.randint(0, max_nu)
        e = rng.choice(list(iter_monomials(n, rng.randint(0, max_fiber))))
        if dega is not None:
            k = dega
        else:
            k = rng.randint(0, n) if forms else 0
        K = tuple(sorted(rng.sample(range(n), k)))
        c = random_rational(ring, rng) if rational else random_polynomial(ring, rng)
        if c.is_zero():
            c = ring.one
        t[(nu, e, K)] = c
    return alg.element(t)


def make_rng(seed=0):
    return random.Random(seed)
