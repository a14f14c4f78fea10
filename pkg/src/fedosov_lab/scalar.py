"""Exact coefficient arithmetic: rational functions over Q in chart coordinates.

Polynomials are python-flint ``fmpq_mpoly`` objects.  A :class:`RationalFunction`
is a numerator/denominator pair kept in canonical form at every operation:
the gcd is cancelled and the denominator is monic (leading coefficient 1 in
lex order), so structural equality coincides with mathematical equality.
"""

from __future__ import annotations

import re
from fractions import Fraction

import flint

__all__ = [
    "CoordinateRing",
    "RationalFunction",
    "ScalarError",
    "ScalarDivisionByZero",
    "PoleError",
    "ExpressionError",
    "parse_expression",
    "ratfun_arith",
    "ratfun_partial",
    "ratfun_eval",
]


class ScalarError(Exception):
    pass


class ScalarDivisionByZero(ScalarError, ZeroDivisionError):
    pass


class PoleError(ScalarError):
    """Raised when a rational function is evaluated at a zero of its denominator."""


class ExpressionError(ScalarError):
    def __init__(self, message, col=None):
        super().__init__(message if col is None else f"col {col}: {message}")
        self.message = message
        self.col = col


def _to_fmpq(c):
    if isinstance(c, flint.fmpq):
        return c
    if isinstance(c, Fraction):
        return flint.fmpq(c.numerator, c.denominator)
    if isinstance(c, int):
        return flint.fmpq(c)
    raise TypeError(f"not an exact rational: {c!r}")


class CoordinateRing:
    """The field Q(x^1, ..., x^n) of rational functions in named chart coordinates."""

    def __init__(self, names):
        names = tuple(names)
        if not names:
            raise ValueError("a chart needs at least one coordinate")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate coordinate names in {names}")
        self.names = names
        self.ctx = flint.fmpq_mpoly_ctx.get(names, "lex")
        self._one = self.ctx.constant(1)
        self._zero = self.ctx.constant(0)
        self.zero = RationalFunction(self._zero, self._one)
        self.one = RationalFunction(self._one, self._one)

    @property
    def dim(self):
        return len(self.names)

    def __eq__(self, other):
        return isinstance(other, CoordinateRing) and self.names == other.names

    def __hash__(self):
        return hash(self.names)

    def __repr__(self):
        return f"CoordinateRing({', '.join(self.names)})"

    def gen(self, i):
        return RationalFunction(self.ctx.gens()[i], self._one)

    def gens(self):
        return tuple(RationalFunction(g, self._one) for g in self.ctx.gens())

    def const(self, c):
        return RationalFunction(self.ctx.constant(_to_fmpq(c)), self._one)

    def poly(self, p):
        return RationalFunction(p, self._one)

    def coerce(self, value):
        if isinstance(value, RationalFunction):
            return value
        if isinstance(value, str):
            return parse_expression(value, self)
        return self.const(value)

    def __call__(self, value):
        return self.coerce(value)

    def fraction(self, num, den):
        return RationalFunction.from_parts(num, den)


class RationalFunction:
    """Canonical quotient ``num/den`` of two ``fmpq_mpoly`` polynomials."""

    __slots__ = ("num", "den")

    def __init__(self, num, den):
        # callers guarantee canonical form; use from_parts otherwise
        self.num = num
        self.den = den

    @classmethod
    def from_parts(cls, num, den):
        if den.is_zero():
            raise ScalarDivisionByZero("zero denominator")
        if num.is_zero():
            return cls(num, den.context().constant(1))
        if not den.is_constant():
            g = num.gcd(den)
            if not g.is_one():
                num = num / g
                den = den / g
        lc = den.leading_coefficient()
        if lc != 1:
            num = num / lc
            den = den / lc
        return cls(num, den)

    # ----------------------------------------------------------------- queries
    @property
    def ctx(self):
        return self.num.context()

    def is_zero(self):
        return self.num.is_zero()

    def __bool__(self):
        return not self.num.is_zero()

    def is_one(self):
        return self.num.is_one() and self.den.is_one()

    def is_polynomial(self):
        return self.den.is_one()

    def is_constant(self):
        return self.den.is_one() and self.num.is_constant()

    def constant_value(self):
        """The value as a ``Fraction``; raises ``ValueError`` if non-constant."""
        if not self.is_constant():
            raise ValueError(f"{self} is not constant")
        c = self.num.coefficient(0) if not self.num.is_zero() else flint.fmpq(0)
        return Fraction(int(c.p), int(c.q))

    def degree(self):
        return max(self.num.total_degree(), self.den.total_degree(), 0)

    def __eq__(self, other):
        if isinstance(other, RationalFunction):
            return self.num == other.num and self.den == other.den
        if isinstance(other, (int, Fraction, flint.fmpq)):
            return self.den.is_one() and self.num == _to_fmpq(other)
        return NotImplemented

    def __ne__(self, other):
        r = self.__eq__(other)
        return r if r is NotImplemented else not r

    def __hash__(self):
        return hash((str(self.num), str(self.den)))

    # -------------------------------------------------------------- arithmetic
    def _coerce(self, other):
        if isinstance(other, RationalFunction):
            return other
        if isinstance(other, (int, Fraction, flint.fmpq)):
            ctx = self.num.context()
            return RationalFunction(ctx.constant(_to_fmpq(other)), ctx.constant(1))
        return None

    def __add__(self, other):
        b = self._coerce(other)
        if b is None:
            return NotImplemented
        if self.den == b.den:
            n = self.num + b.num
            if self.den.is_one():
                return RationalFunction(n, self.den)
            return RationalFunction.from_parts(n, self.den)
        return RationalFunction.from_parts(
            self.num * b.den + b.num * self.den, self.den * b.den
        )

    __radd__ = __add__

    def __neg__(self):
        return RationalFunction(-self.num, self.den)

    def __sub__(self, other):
        b = self._coerce(other)
        if b is None:
            return NotImplemented
        return self + (-b)

    def __rsub__(self, other):
        b = self._coerce(other)
        if b is None:
            return NotImplemented
        return b + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, flint.fmpq)):
            c = _to_fmpq(other)
            if c == 0:
                return RationalFunction(self.num * 0, self.den.context().constant(1))
            return RationalFunction(self.num * c, self.den)
        if not isinstance(other, RationalFunction):
            return NotImplemented
        a, b = self, other
        if a.num.is_zero() or b.num.is_zero():
            ctx = a.num.context()
            return RationalFunction(ctx.constant(0), ctx.constant(1))
        if a.den.is_one() and b.den.is_one():
            return RationalFunction(a.num * b.num, a.den)
        an, ad, bn, bd = a.num, a.den, b.num, b.den
        # cross cancellation keeps the product canonical (gcds are monic)
        if not bd.is_one():
            g = an.gcd(bd)
            if not g.is_one():
                an, bd = an / g, bd / g
        if not ad.is_one():
            g = bn.gcd(ad)
            if not g.is_one():
                bn, ad = bn / g, ad / g
        return RationalFunction(an * bn, ad * bd)

    __rmul__ = __mul__

    def inverse(self):
        if self.num.is_zero():
            raise ScalarDivisionByZero("division by the zero rational function")
        lc = self.num.leading_coefficient()
        return RationalFunction(self.den / lc, self.num / lc)

    def __truediv__(self, other):
        b = self._coerce(other)
        if b is None:
            return NotImplemented
        return self * b.inverse()

    def __rtruediv__(self, other):
        b = self._coerce(other)
        if b is None:
            return NotImplemented
        return b * self.inverse()

    def __pow__(self, k):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return self.inverse() ** (-k)
        return RationalFunction(self.num**k, self.den**k)

    # ---------------------------------------------------------------- calculus
    def partial(self, i):
        dn = self.num.derivative(i)
        if self.den.is_one():
            return RationalFunction(dn, self.den)
        dd = self.den.derivative(i)
        return RationalFunction.from_parts(dn * self.den - self.num * dd, self.den * self.den)

    def evaluate(self, point):
        vals = [_to_fmpq(v) for v in point]
        if len(vals) != self.num.context().nvars():
            raise ValueError("point has the wrong number of coordinates")
        d = self.den(*vals)
        if d == 0:
            raise PoleError(f"denominator {self.den} vanishes at {tuple(point)}")
        v = self.num(*vals) / d
        return Fraction(int(v.p), int(v.q))

    # --------------------------------------------------------------- rendering
    def __str__(self):
        n = str(self.num)
        if self.den.is_one():
            return n
        if len(self.num.coeffs()) > 1:
            n = f"({n})"
        d = str(self.den)
        if len(self.den.coeffs()) > 1 or "*" in d:
            d = f"({d})"
        return f"{n}/{d}"

    def __repr__(self):
        return f"RationalFunction({self})"

    def is_atomic(self):
        """True when the rendering needs no parentheses as a factor."""
        return self.den.is_one() and len(self.num.coeffs()) <= 1


# ---------------------------------------------------------------------------
# spec-level operation names
# ---------------------------------------------------------------------------

def ratfun_arith(op, a, b=None):
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    if op == "neg":
        return -a
    raise ValueError(f"unknown operation {op!r}")


def ratfun_partial(f, i):
    if not 0 <= i < f.num.context().nvars():
        raise IndexError(f"coordinate index {i} out of range")
    return f.partial(i)


def ratfun_eval(f, point):
    return f.evaluate(point)


# ---------------------------------------------------------------------------
# expression grammar
#   expr  := term (('+' | '-') term)*
#   term  := unary (('*' | '/') unary)*
#   unary := ('+' | '-') unary | power
#   power := atom ('^' exponent)?
#   atom  := INTEGER | NAME | '(' expr ')'
#   exponent := ['+' | '-'] INTEGER | '(' ['+' | '-'] INTEGER ')'
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>\*\*|[-+*/^()]))"
)


def _tokenize(text):
    pos = 0
    out = []
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ExpressionError(f"unexpected character {text[pos]!r}", pos + 1)
        start = m.start(m.lastgroup)
        kind = m.lastgroup
        value = m.group(kind)
        if kind == "num" and "." in value:
            raise ExpressionError("floating point literals are not allowed", start + 1)
        if value == "**":
            value = "^"
        out.append((kind, value, start + 1))
        pos = m.end()
    out.append(("end", "", len(text) + 1))
    return out


class _Parser:
    def __init__(self, text, ring, variables):
        self.toks = _tokenize(text)
        self.i = 0
        self.ring = ring
        self.variables = variables
        self.depth = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, value):
        t = self.take()
        if t[1] != value:
            got = "end of input" if t[0] == "end" else repr(t[1])
            raise ExpressionError(f"expected {value!r}, got {got}", t[2])
        return t

    def parse(self):
        if self.peek()[0] == "end":
            raise ExpressionError("empty expression", 1)
        v = self.expr()
        t = self.peek()
        if t[0] != "end":
            raise ExpressionError(f"unexpected {t[1]!r}", t[2])
        return v

    def expr(self):
        v = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            w = self.term()
            v = v + w if op == "+" else v - w
        return v

    def term(self):
        v = self.unary()
        while self.peek()[1] in ("*", "/"):
            _, op, col = self.take()
            w = self.unary()
            if op == "*":
                v = v * w
            else:
                if w.is_zero():
                    raise ExpressionError("division by zero", col)
                v = v / w
        return v

    def unary(self):
        t = self.peek()
        sign = 1
        while t[1] in ("+", "-"):
            self.take()
            if t[1] == "-":
                sign = -sign
            t = self.peek()
        v = self.power()
        return -v if sign < 0 else v

    def power(self):
        base = self.atom()
        t = self.peek()
        if t[1] == "^":
            self.take()
            k, col = self.exponent()
            if k < 0 and base.is_zero():
                raise ExpressionError("zero raised to a negative power", col)
            if abs(k) > 64:
                raise ExpressionError("exponent too large", col)
            base = base**k
            if self.peek()[1] == "^":
                raise ExpressionError("chained exponents need parentheses", self.peek()[2])
        return base

    def exponent(self):
        t = self.peek()
        paren = t[1] == "("
        if paren:
            self.take()
        sign = 1
        t = self.peek()
        if t[1] in ("+", "-"):
            self.take()
            sign = -1 if t[1] == "-" else 1
        t = self.take()
        if t[0] != "num":
            raise ExpressionError("exponent must be an integer", t[2])
        if paren:
            self.expect(")")
        return sign * int(t[1]), t[2]

    def atom(self):
        t = self.take()
        kind, value, col = t
        if kind == "num":
            return self.ring.const(int(value))
        if kind == "name":
            if value not in self.variables:
                raise ExpressionError(f"unknown name {value!r}", col)
            return self.variables[value]
        if value == "(":
            self.depth += 1
            if self.depth > 100:
                raise ExpressionError("parentheses nested too deeply", col)
            v = self.expr()
            self.expect(")")
            self.depth -= 1
            return v
        got = "end of input" if kind == "end" else repr(value)
        raise ExpressionError(f"unexpected {got}", col)


def parse_expression(text, ring, extra=None):
    """Parse ``text`` into a :class:`RationalFunction` of ``ring``.

    ``extra`` maps additional names to values (e.g. a formal parameter living
    in an extended ring); coordinate names always resolve to generators.
    """
    variables = dict(zip(ring.names, ring.gens()))
    if extra:
        variables.update(extra)
    return _Parser(text, ring, variables).parse()
