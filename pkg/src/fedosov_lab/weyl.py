"""The formal Weyl algebra W (x) Lambda over a chart, truncated by total degree.

A term is ``coeff * nu^k * y^alpha (x) dx^K`` where ``y^1 .. y^n`` are the formal
fiber variables standing for the symmetric forms ``dx^i \\/ ...`` and ``K`` is a
strictly increasing tuple of coordinate indices standing for the wedge product
``dx^{K_0} ^ dx^{K_1} ^ ...``.  The total degree is ``|alpha| + 2k``.

Every element carries ``prec``: the largest total degree up to which its terms
are known exactly, or ``None`` when the element is exact (a finite sum with no
unknown tail).  Operations propagate ``prec`` so that every result is honest
about how much of it is certified; terms beyond ``prec`` are never stored.
The ambient algebra additionally caps everything at its truncation order ``N``.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from functools import lru_cache

from .scalar import RationalFunction

__all__ = [
    "WeylAlgebra",
    "WeylElement",
    "WeylError",
    "pointwise_mul",
    "weyl_product",
    "graded_commutator",
    "degree_of",
    "truncate",
    "is_central",
]

INF = math.inf


class WeylError(ValueError):
    pass


@lru_cache(maxsize=None)
def wedge(k1, k2):
    """Merge two increasing index tuples; returns ``(sign, merged)`` or ``None``."""
    if not k1:
        return 1, k2
    if not k2:
        return 1, k1
    if set(k1) & set(k2):
        return None
    inversions = sum(1 for a in k1 for b in k2 if a > b)
    return (-1 if inversions % 2 else 1), tuple(sorted(k1 + k2))


def _p(prec):
    return INF if prec is None else prec


def _unp(value):
    return None if value == INF else int(value)


def term_degree(key):
    nu, alpha, _ = key
    return sum(alpha) + 2 * nu


class WeylElement:
    """Immutable truncated element of W (x) Lambda.  Build through a :class:`WeylAlgebra`."""

    __slots__ = ("alg", "terms", "prec")

    def __init__(self, alg, terms, prec=None):
        self.alg = alg
        self.terms = terms
        self.prec = prec

    # ----------------------------------------------------------------- basics
    def is_zero(self):
        """True when every known term vanishes (zero modulo the unknown tail)."""
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def __len__(self):
        return len(self.terms)

    def __eq__(self, other):
        if not isinstance(other, WeylElement):
            return NotImplemented
        return self.prec == other.prec and self.terms == other.terms

    def __hash__(self):
        return hash((self.prec, frozenset(self.terms.items())))

    def agrees(self, other):
        """Equality of the parts known in both elements."""
        return (self - other).is_zero()

    def _check(self, other):
        if not isinstance(other, WeylElement):
            raise TypeError(f"expected WeylElement, got {type(other).__name__}")
        if other.alg is not self.alg and other.alg != self.alg:
            raise WeylError("elements belong to different charts or truncation orders")

    def __add__(self, other):
        if not isinstance(other, WeylElement):
            other = self.alg.scalar(other)
        self._check(other)
        prec = _unp(min(_p(self.prec), _p(other.prec)))
        terms = dict(self.terms)
        for k, c in other.terms.items():
            v = terms.get(k)
            if v is None:
                terms[k] = c
            else:
                v = v + c
                if v.is_zero():
                    del terms[k]
                else:
                    terms[k] = v
        return self.alg._finish(terms, prec)

    __radd__ = __add__

    def __neg__(self):
        return WeylElement(self.alg, {k: -c for k, c in self.terms.items()}, self.prec)

    def __sub__(self, other):
        if not isinstance(other, WeylElement):
            other = self.alg.scalar(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, c):
        """Multiplication by a scalar coefficient (rational or rational function)."""
        if isinstance(c, WeylElement):
            raise TypeError("use pointwise_mul or weyl_product for element products")
        if not isinstance(c, RationalFunction):
            c = self.alg.ring.coerce(c)
        if c.is_zero():
            return WeylElement(self.alg, {}, self.prec)
        return WeylElement(self.alg, {k: v * c for k, v in self.terms.items()}, self.prec)

    __rmul__ = __mul__

    # --------------------------------------------------------------- gradings
    def min_degree(self, fiber_only=False):
        """Lowest total degree that may be nonzero, counting the unknown tail."""
        m = INF if self.prec is None else self.prec + 1
        for key in self.terms:
            if fiber_only and not any(key[1]):
                continue
            d = term_degree(key)
            if d < m:
                m = d
        return m

    def max_degree(self):
        return max((term_degree(k) for k in self.terms), default=-1)

    def mul_nu(self, k=1):
        prec = None if self.prec is None else self.prec + 2 * k
        terms = {(nu + k, a, f): c for (nu, a, f), c in self.terms.items()}
        return self.alg._finish(terms, prec)

    def div_nu(self, k=1):
        terms = {}
        for (nu, a, f), c in self.terms.items():
            if nu < k:
                raise WeylError("element is not divisible by the requested power of nu")
            terms[(nu - k, a, f)] = c
        prec = None if self.prec is None else self.prec - 2 * k
        return self.alg._finish(terms, prec)

    def homogeneous(self, *, degs=None, dega=None, nu=None):
        """Projection onto the terms with the given symmetric/antisymmetric/nu degrees."""
        terms = {
            k: c
            for k, c in self.terms.items()
            if (degs is None or sum(k[1]) == degs)
            and (dega is None or len(k[2]) == dega)
            and (nu is None or k[0] == nu)
        }
        return WeylElement(self.alg, terms, self.prec)

    def nu_coefficients(self):
        """For a formal function: ``{k: coefficient of nu^k}``."""
        out = {}
        for (nu, a, f), c in self.terms.items():
            if any(a) or f:
                raise WeylError("not a formal function (has fiber or form degree)")
            out[nu] = c
        return out

    def certified_nu_order(self):
        """Highest power of nu whose coefficient is certified (``None`` if exact)."""
        if self.prec is None:
            return None
        return self.prec // 2

    def coefficient(self, nu=0, fiber=None, forms=()):
        fiber = tuple(fiber) if fiber is not None else (0,) * self.alg.dim
        return self.terms.get((nu, fiber, tuple(forms)), self.alg.ring.zero)

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda kv: kv[0])

    # -------------------------------------------------------------- rendering
    def __str__(self):
        return self.alg.render(self)

    def __repr__(self):
        p = "exact" if self.prec is None else f"prec={self.prec}"
        return f"<WeylElement {self} [{p}]>"


def _coeff_prefix(c, has_factors):
    if not has_factors:
        return str(c)
    if c.is_constant():
        v = c.constant_value()
        if v == 1:
            return ""
        if v == -1:
            return "-"
        if v.denominator == 1:
            return str(v)
        if v < 0:
            return f"-({-v})"
        return f"({v})"
    if c.is_polynomial() and len(c.num.coeffs()) == 1:
        return f"{c}*"
    return f"({c})"


class WeylAlgebra:
    """Fibrewise Weyl product data for one chart: dimension, Poisson tensor, order N."""

    def __init__(self, ring, lam, order):
        self.ring = ring
        self.dim = ring.dim
        self.N = int(order)
        if self.N < 0:
            raise WeylError("truncation order must be non-negative")
        n = self.dim
        self.lam = [[ring.coerce(lam[i][j]) for j in range(n)] for i in range(n)]
        for i in range(n):
            for j in range(n):
                if self.lam[i][j] != -self.lam[j][i]:
                    raise WeylError("Poisson tensor must be antisymmetric")
        self._pairs = [(i, j) for i in range(n) for j in range(n) if not self.lam[i][j].is_zero()]
        self._patterns = {}
        self._lampow = {}
        self._key = (ring.names, self.N, tuple(str(self.lam[i][j]) for i in range(n) for j in range(n)))

    def __eq__(self, other):
        return isinstance(other, WeylAlgebra) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def with_order(self, order):
        return WeylAlgebra(self.ring, self.lam, order)

    # ------------------------------------------------------------ constructors
    def _finish(self, terms, prec):
        cap = self.N if prec is None else min(prec, self.N)
        dropped = False
        out = {}
        for k, c in terms.items():
            if c.is_zero():
                continue
            if term_degree(k) > cap:
                dropped = True
                continue
            out[k] = c
        if prec is None and dropped:
            prec = self.N
        elif prec is not None and prec > self.N:
            prec = self.N
        return WeylElement(self, out, prec)

    def element(self, terms, prec=None):
        """Build from ``{(nu, fiber_exponents, forms): coeff}``; forms need not be sorted."""
        out = {}
        for (nu, fiber, forms), c in terms.items():
            fiber = tuple(int(e) for e in fiber)
            if len(fiber) != self.dim or min(fiber, default=0) < 0 or nu < 0:
                raise WeylError(f"bad term key {(nu, fiber, forms)}")
            forms = tuple(forms)
            sign = 1
            if list(forms) != sorted(forms):
                if len(set(forms)) != len(forms):
                    continue
                perm = sorted(range(len(forms)), key=lambda i: forms[i])
                sign = _perm_sign(perm)
                forms = tuple(sorted(forms))
            elif len(set(forms)) != len(forms):
                continue
            c = self.ring.coerce(c) * sign
            key = (nu, fiber, forms)
            out[key] = out[key] + c if key in out else c
        return self._finish(out, prec)

    def zero(self, prec=None):
        return WeylElement(self, {}, prec)

    def scalar(self, c):
        c = self.ring.coerce(c)
        return self._finish({(0, (0,) * self.dim, ()): c}, None)

    one = property(lambda self: self.scalar(1))

    def term(self, coeff=1, nu=0, fiber=None, forms=()):
        fiber = (0,) * self.dim if fiber is None else fiber
        return self.element({(nu, tuple(fiber), tuple(forms)): coeff})

    def y(self, i):
        e = [0] * self.dim
        e[i] = 1
        return self.term(1, fiber=e)

    def dx(self, i):
        return self.term(1, forms=(i,))

    def nu(self, k=1):
        return self.term(1, nu=k)

    def function(self, f, prec=None):
        """A formal function: a rational function or ``{nu_power: coefficient}``."""
        if isinstance(f, WeylElement):
            return f
        if isinstance(f, dict):
            return self.element({(k, (0,) * self.dim, ()): c for k, c in f.items()}, prec)
        return self.element({(0, (0,) * self.dim, ()): f}, prec)

    # --------------------------------------------------------- product kernel
    def _lam_power(self, e):
        v = self._lampow.get(e)
        if v is None:
            v = self.ring.one
            n = self.dim
            idx = 0
            for i in range(n):
                for j in range(i + 1, n):
                    if e[idx]:
                        v = v * self.lam[i][j] ** e[idx]
                    idx += 1
            self._lampow[e] = v
        return v

    def _pattern(self, alpha, beta):
        """Contraction patterns of exp((nu/2) Lam^{ij} d_i (x) d_j) on y^alpha (x) y^beta.

        Returns a list of ``(p, out_alpha, lam_exponents, scalar)`` with the
        Lambda-monomial written over independent entries i<j.
        """
        key = (alpha, beta)
        hit = self._patterns.get(key)
        if hit is not None:
            return hit
        n = self.dim
        pairs = self._pairs
        npairs = n * (n - 1) // 2
        pair_index = {}
        idx = 0
        for i in range(n):
            for j in range(i + 1, n):
                pair_index[(i, j)] = idx
                idx += 1
        groups = {}

        def rec(pi, rows, cols, p, e, sign, denom):
            if pi == len(pairs):
                out = tuple(rows[i] + cols[i] for i in range(n))
                scal = Fraction(sign, denom * 2**p)
                for i in range(n):
                    scal *= math.perm(alpha[i], alpha[i] - rows[i]) * math.perm(beta[i], beta[i] - cols[i])
                gkey = (out, tuple(e))
                groups[gkey] = groups.get(gkey, 0) + scal
                return
            i, j = pairs[pi]
            top = min(rows[i], cols[j])
            if i < j:
                u = pair_index[(i, j)]
                s = 1
            else:
                u = pair_index[(j, i)]
                s = -1
            for m in range(top + 1):
                rows[i] -= m
                cols[j] -= m
                e[u] += m
                rec(pi + 1, rows, cols, p + m, e, sign * (s**m), denom * math.factorial(m))
                rows[i] += m
                cols[j] += m
                e[u] -= m

        rec(0, list(alpha), list(beta), 0, [0] * npairs, 1, 1)
        result = []
        for (out, e), scal in groups.items():
            if scal != 0:
                p = (sum(alpha) + sum(beta) - sum(out)) // 2
                result.append((p, out, e, scal))
        result.sort(key=lambda t: t[0])
        self._patterns[key] = result
        return result

    def _core(self, a, b, mode, cap):
        """Shared loop for the fibrewise product.

        mode 'full': a o b;  'odd': [a, b] (super-commutator, 2 x odd orders);
        'oddnu': (1/nu)[a, b];  'sigma': sigma(a o b).
        """
        acc = {}
        skipped = False
        zero_alpha = (0,) * self.dim
        b_items = list(b.terms.items())
        shift = -2 if mode == "oddnu" else 0
        for (nua, alpha, ka), ca in a.terms.items():
            dega_ = sum(alpha) + 2 * nua
            if mode == "sigma" and ka:
                continue
            for (nub, beta, kb), cb in b_items:
                if mode == "sigma":
                    if kb or sum(alpha) != sum(beta):
                        continue
                if mode in ("odd", "oddnu") and (not any(alpha) or not any(beta)):
                    continue
                if dega_ + sum(beta) + 2 * nub + shift > cap:
                    skipped = True
                    continue
                w = wedge(ka, kb)
                if w is None:
                    continue
                sign, kout = w
                base = None
                for p, out, e, scal in self._pattern(alpha, beta):
                    if mode == "sigma" and any(out):
                        continue
                    if mode in ("odd", "oddnu"):
                        if p % 2 == 0:
                            continue
                        scal = 2 * scal
                        nuout = nua + nub + p - (1 if mode == "oddnu" else 0)
                    else:
                        nuout = nua + nub + p
                    if base is None:
                        base = ca * cb
                    c = base if not any(e) else base * self._lam_power(e)
                    c = c * (scal * sign)
                    key = (nuout, out, kout)
                    prev = acc.get(key)
                    acc[key] = c if prev is None else prev + c
        if mode == "sigma":
            acc = {k: v for k, v in acc.items() if k[1] == zero_alpha}
        return acc, skipped

    @staticmethod
    def _capped(result, prec, cap):
        # terms skipped above the cap make the product certified only up to the cap
        acc, skipped = result
        if skipped and (prec is None or prec > cap):
            prec = cap
        return acc, prec

    def _product_prec(self, a, b, fiber_only, shift):
        pa, pb = _p(a.prec), _p(b.prec)
        ma = a.min_degree(fiber_only)
        mb = b.min_degree(fiber_only)
        v = min(pa + mb, pb + ma) + shift
        return _unp(v)

    # ---------------------------------------------------------------- products
    def mu(self, a, b):
        """Super-commutative pointwise product."""
        a._check(b)
        prec = self._product_prec(a, b, False, 0)
        cap = self.N if prec is None else min(prec, self.N)
        acc = {}
        skipped = False
        for (nua, alpha, ka), ca in a.terms.items():
            for (nub, beta, kb), cb in b.terms.items():
                w = wedge(ka, kb)
                if w is None:
                    continue
                if sum(alpha) + sum(beta) + 2 * (nua + nub) > cap:
                    skipped = True
                    continue
                sign, kout = w
                key = (nua + nub, tuple(x + y for x, y in zip(alpha, beta)), kout)
                c = ca * cb * sign
                prev = acc.get(key)
                acc[key] = c if prev is None else prev + c
        return self._finish(*self._capped((acc, skipped), prec, cap))

    def circ(self, a, b):
        """Fibrewise Weyl product a o b."""
        a._check(b)
        prec = self._product_prec(a, b, False, 0)
        cap = self.N if prec is None else min(prec, self.N)
        return self._finish(*self._capped(self._core(a, b, "full", cap), prec, cap))

    def bracket(self, a, b):
        """dega-graded super-commutator [a, b] with respect to o."""
        a._check(b)
        prec = self._product_prec(a, b, True, 0)
        cap = self.N if prec is None else min(prec, self.N)
        return self._finish(*self._capped(self._core(a, b, "odd", cap), prec, cap))

    def ad_nu(self, a, b):
        """(1/nu) [a, b], computed before truncation so no order is lost."""
        a._check(b)
        prec = self._product_prec(a, b, True, -2)
        cap = self.N if prec is None else min(prec, self.N)
        return self._finish(*self._capped(self._core(a, b, "oddnu", cap), prec, cap))

    def sigma_circ(self, a, b):
        """sigma(a o b) without forming the full product."""
        a._check(b)
        prec = self._product_prec(a, b, False, 0)
        cap = self.N if prec is None else min(prec, self.N)
        return self._finish(*self._capped(self._core(a, b, "sigma", cap), prec, cap))

    # --------------------------------------------------------------- rendering
    def render(self, a):
        if not a.terms:
            return "0"
        pieces = []
        for (nu, alpha, forms), c in sorted(a.terms.items(), key=lambda kv: kv[0]):
            factors = []
            if nu:
                factors.append("ν" if nu == 1 else f"ν^{nu}")
            for i, e in enumerate(alpha):
                if e:
                    factors.append(f"y{i + 1}" if e == 1 else f"y{i + 1}^{e}")
            body = "*".join(factors)
            prefix = _coeff_prefix(c, bool(body or forms))
            if prefix.endswith("*") and not body:
                prefix = prefix[:-1]
            txt = prefix + body
            if forms:
                wedge_txt = "∧".join(f"dx{i + 1}" for i in forms)
                if txt in ("", "-"):
                    txt = f"{txt}1"
                txt = f"{txt} ⊗ {wedge_txt}"
            pieces.append(txt)
        out = pieces[0]
        for p in pieces[1:]:
            if p.startswith("-"):
                out += " - " + p[1:]
            else:
                out += " + " + p
        return out


def _perm_sign(perm):
    sign = 1
    perm = list(perm)
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


# ---------------------------------------------------------------------------
# operation names used throughout the package
# ---------------------------------------------------------------------------

def pointwise_mul(a, b):
    return a.alg.mu(a, b)


def weyl_product(a, b):
    return a.alg.circ(a, b)


def graded_commutator(a, b):
    return a.alg.bracket(a, b)


def degree_of(a, kind):
    """Set of degrees of ``kind`` in {'degs', 'dega', 'degnu', 'Deg'} occurring in ``a``."""
    fn = {
        "degs": lambda k: sum(k[1]),
        "dega": lambda k: len(k[2]),
        "degnu": lambda k: k[0],
        "Deg": term_degree,
    }.get(kind)
    if fn is None:
        raise ValueError(f"unknown degree kind {kind!r}")
    return {fn(k) for k in a.terms}


def truncate(a, order):
    """Drop all terms of total degree above ``order``."""
    terms = {k: c for k, c in a.terms.items() if term_degree(k) <= order}
    prec = a.prec
    if len(terms) != len(a.terms) or (prec is not None and prec > order):
        prec = order if prec is None else min(prec, order)
    return WeylElement(a.alg, terms, prec)


def is_central(a):
    """Central in (W (x) Lambda, o) iff no term has positive symmetric degree."""
    return all(not any(k[1]) for k in a.terms)


def iter_monomials(n, degree):
    """All exponent tuples of length ``n`` and total degree ``degree``."""
    if n == 1:
        yield (degree,)
        return
    for first in range(degree, -1, -1):
        for rest in iter_monomials(n - 1, degree - first):
            yield (first,) + rest


def iter_subsets(n, max_size=None):
    top = n if max_size is None else min(n, max_size)
    for k in range(top + 1):
        yield from itertools.combinations(range(n), k)
