"""Chart-level operators on W (x) Lambda: delta, its homotopy, sigma, nabla, R, L_X, D.

Forms and formal functions are represented as central elements (no fiber
variables), e.g. the symplectic form is ``omega_ij/2 * 1 (x) dx^i ^ dx^j``.

Conventions (fixed once, checked by the calibration tests):

* ``Lam = -omega^{-1}``, so that ``x*y - y*x = nu`` for ``omega = dx ^ dy``;
* Poisson bracket ``{f, g} = Lam^{ij} d_i f d_j g``;
* Hamiltonian fields satisfy ``i_X omega = dH``;
* ``R^t_jkl = d_k G^t_lj - d_l G^t_kj + G^t_km G^m_lj - G^t_lm G^m_kj``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

from .scalar import CoordinateRing, RationalFunction
from .weyl import WeylAlgebra, WeylElement, wedge

__all__ = [
    "GeometryError",
    "ChartGeometry",
    "VectorField",
    "SymplecticCheck",
    "delta",
    "delta_inv",
    "sigma_project",
    "insert_field",
    "nabla_operator",
    "curvature_element",
    "lie_derivative",
    "sym_cov_derivative",
    "check_symplectic",
    "exterior_d",
    "one_form",
    "two_form",
    "form_components",
    "interior",
]


class GeometryError(ValueError):
    """A chart geometry violates one of its defining identities."""

    def __init__(self, invariant, detail=""):
        self.invariant = invariant
        super().__init__(f"{invariant}{': ' + detail if detail else ''}")


def _acc(acc, key, val):
    prev = acc.get(key)
    acc[key] = val if prev is None else prev + val


def _inverse(m, ring):
    n = len(m)
    a = [[m[i][j] for j in range(n)] + [ring.one if i == j else ring.zero for j in range(n)] for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if not a[r][col].is_zero()), None)
        if piv is None:
            return None
        a[col], a[piv] = a[piv], a[col]
        inv = a[col][col].inverse()
        a[col] = [v * inv for v in a[col]]
        for r in range(n):
            if r != col and not a[r][col].is_zero():
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [row[n:] for row in a]


class VectorField:
    """Components ``X^i`` in the chart coordinates."""

    __slots__ = ("components",)

    def __init__(self, components):
        self.components = tuple(components)

    @classmethod
    def of(cls, ring, comps):
        return cls(ring.coerce(c) for c in comps)

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, i):
        return self.components[i]

    def __len__(self):
        return len(self.components)

    def __eq__(self, other):
        return isinstance(other, VectorField) and self.components == other.components

    def __hash__(self):
        return hash(self.components)

    def __add__(self, other):
        return VectorField(a + b for a, b in zip(self, other))

    def __sub__(self, other):
        return VectorField(a - b for a, b in zip(self, other))

    def __mul__(self, c):
        return VectorField(a * c for a in self)

    __rmul__ = __mul__

    def is_zero(self):
        return all(c.is_zero() for c in self.components)

    def apply(self, f):
        """Directional derivative X(f) of a rational function."""
        out = None
        for i, c in enumerate(self.components):
            if not c.is_zero():
                d = f.partial(i)
                if not d.is_zero():
                    out = c * d if out is None else out + c * d
        return f * 0 if out is None else out

    def bracket(self, other):
        """Lie bracket of vector fields ``[X, Y]^k = X(Y^k) - Y(X^k)``."""
        return VectorField(self.apply(b) - other.apply(a) for a, b in zip(self, other))

    def __str__(self):
        return "(" + ", ".join(str(c) for c in self.components) + ")"

    __repr__ = __str__


class ChartGeometry:
    """A symplectic chart with a symplectic torsion-free connection.

    ``omega[i][j]`` are the components of the symplectic form and
    ``gamma[k][i][j]`` the Christoffel symbols ``G^k_ij``. All defining
    identities are checked on construction.
    """

    def __init__(self, ring, omega, gamma=None, *, name=""):
        if not isinstance(ring, CoordinateRing):
            ring = CoordinateRing(ring)
        n = ring.dim
        if n == 0 or n % 2:
            raise GeometryError("dimension must be even and positive", f"got {n}")
        self.ring = ring
        self.dim = n
        self.name = name
        self.omega = [[ring.coerce(omega[i][j]) for j in range(n)] for i in range(n)]
        if gamma is None:
            gamma = [[[0] * n for _ in range(n)] for _ in range(n)]
        self.gamma = [[[ring.coerce(gamma[k][i][j]) for j in range(n)] for i in range(n)] for k in range(n)]
        self._validate()
        inv = _inverse(self.omega, ring)
        if inv is None:
            raise GeometryError("omega not invertible")
        self.lam = [[-inv[i][j] for j in range(n)] for i in range(n)]
        self._gamma_terms = {}
        for i in range(n):
            for j in range(n):
                self._gamma_terms[(i, j)] = [(k, self.gamma[k][i][j]) for k in range(n) if not self.gamma[k][i][j].is_zero()]
        self._algebras = {}

    @property
    def coords(self):
        return self.ring.names

    def _validate(self):
        n, w, G = self.dim, self.omega, self.gamma
        for i in range(n):
            for j in range(n):
                if w[i][j] != -w[j][i]:
                    raise GeometryError("omega not antisymmetric", f"omega[{i + 1},{j + 1}]")
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    if (w[j][k].partial(i) + w[k][i].partial(j) + w[i][j].partial(k)).is_zero():
                        continue
                    raise GeometryError("omega not closed", f"indices ({i + 1},{j + 1},{k + 1})")
        for k in range(n):
            for i in range(n):
                for j in range(i + 1, n):
                    if G[k][i][j] != G[k][j][i]:
                        raise GeometryError("connection has torsion", f"Gamma[{k + 1}; {i + 1},{j + 1}]")
        for k in range(n):
            for i in range(n):
                for j in range(n):
                    v = w[i][j].partial(k)
                    for l in range(n):
                        v = v - G[l][k][i] * w[l][j] - G[l][k][j] * w[i][l]
                    if not v.is_zero():
                        raise GeometryError(
                            "connection not symplectic (nabla omega != 0)",
                            f"component k={k + 1}, (i,j)=({i + 1},{j + 1})",
                        )

    def algebra(self, order):
        alg = self._algebras.get(order)
        if alg is None:
            alg = WeylAlgebra(self.ring, self.lam, order)
            self._algebras[order] = alg
        return alg

    def is_flat(self):
        return all(c.is_zero() for c in self._riemann_flat())

    def _riemann_flat(self):
        R = self.riemann
        n = self.dim
        return [R[t][j][k][l] for t in range(n) for j in range(n) for k in range(n) for l in range(n)]

    @cached_property
    def riemann(self):
        """``R^t_jkl`` indexed as ``riemann[t][j][k][l]``."""
        n, G = self.dim, self.gamma
        out = [[[[self.ring.zero] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
        for t in range(n):
            for j in range(n):
                for k in range(n):
                    for l in range(k + 1, n):
                        v = G[t][l][j].partial(k) - G[t][k][j].partial(l)
                        for m in range(n):
                            v = v + G[t][k][m] * G[m][l][j] - G[t][l][m] * G[m][k][j]
                        out[t][j][k][l] = v
                        out[t][j][l][k] = -v
        return out

    def poisson(self, f, g):
        n = self.dim
        out = self.ring.zero
        df = [f.partial(i) for i in range(n)]
        dg = [g.partial(j) for j in range(n)]
        for i in range(n):
            if df[i].is_zero():
                continue
            for j in range(n):
                if not self.lam[i][j].is_zero() and not dg[j].is_zero():
                    out = out + self.lam[i][j] * df[i] * dg[j]
        return out

    def hamiltonian_field(self, H):
        """Vector field with ``i_X omega = dH``: ``X^k = Lam^{kj} d_j H``."""
        n = self.dim
        dh = [H.partial(j) for j in range(n)]
        comps = []
        for k in range(n):
            v = self.ring.zero
            for j in range(n):
                if not self.lam[k][j].is_zero():
                    v = v + self.lam[k][j] * dh[j]
            comps.append(v)
        return VectorField(comps)

    def contract_omega(self, X):
        """Components of ``theta_X = i_X omega``: ``theta_j = X^i omega_ij``."""
        n = self.dim
        out = []
        for j in range(n):
            v = self.ring.zero
            for i in range(n):
                if not X[i].is_zero():
                    v = v + X[i] * self.omega[i][j]
            out.append(v)
        return out

    def with_connection(self, gamma, name=""):
        return ChartGeometry(self.ring, self.omega, gamma, name=name or self.name)

    def same_omega(self, other):
        return self.ring == other.ring and all(
            self.omega[i][j] == other.omega[i][j] for i in range(self.dim) for j in range(self.dim)
        )

    def __repr__(self):
        return f"<ChartGeometry {self.name or ','.join(self.coords)} dim={self.dim}>"


# ---------------------------------------------------------------------------
# form helpers (central elements)
# ---------------------------------------------------------------------------

def one_form(alg, comps):
    """``comps`` is a list of components, or ``{nu_power: components}``."""
    if not isinstance(comps, dict):
        comps = {0: comps}
    zero = (0,) * alg.dim
    terms = {}
    for p, cs in comps.items():
        for i, c in enumerate(cs):
            c = alg.ring.coerce(c)
            if not c.is_zero():
                terms[(p, zero, (i,))] = c
    return alg.element(terms)


def two_form(alg, matrix):
    """``matrix`` is an antisymmetric n x n matrix, or ``{nu_power: matrix}``."""
    if not isinstance(matrix, dict):
        matrix = {0: matrix}
    zero = (0,) * alg.dim
    terms = {}
    n = alg.dim
    for p, m in matrix.items():
        for i in range(n):
            for j in range(i + 1, n):
                c = alg.ring.coerce(m[i][j])
                if not c.is_zero():
                    terms[(p, zero, (i, j))] = c
    return alg.element(terms)


def form_components(a, degree=None):
    """``{nu_power: {forms_tuple: coeff}}`` for a central element."""
    out = {}
    for (nu, alpha, forms), c in a.terms.items():
        if any(alpha):
            raise ValueError("not a central element")
        if degree is not None and len(forms) != degree:
            continue
        out.setdefault(nu, {})[forms] = c
    return out


def exterior_d(a):
    """de Rham differential on a central element (coefficientwise)."""
    acc = {}
    for (nu, alpha, forms), c in a.terms.items():
        if any(alpha):
            raise ValueError("exterior_d expects a central element")
        for i in range(a.alg.dim):
            w = wedge((i,), forms)
            if w is None:
                continue
            d = c.partial(i)
            if d.is_zero():
                continue
            sign, kout = w
            _acc(acc, (nu, alpha, kout), d * sign if sign < 0 else d)
    return a.alg._finish(acc, a.prec)


def interior(X, a):
    """Antisymmetric insertion ``i_a(X)``."""
    return insert_field("antisymmetric", X, a)


# ---------------------------------------------------------------------------
# delta, delta^{-1}, sigma
# ---------------------------------------------------------------------------

def delta(a):
    """``delta = (1 (x) dx^i) i_s(d_i)``."""
    acc = {}
    for (nu, alpha, forms), c in a.terms.items():
        for i, e in enumerate(alpha):
            if not e:
                continue
            w = wedge((i,), forms)
            if w is None:
                continue
            sign, kout = w
            beta = alpha[:i] + (e - 1,) + alpha[i + 1 :]
            _acc(acc, (nu, beta, kout), c * (e * sign))
    prec = None if a.prec is None else a.prec - 1
    return a.alg._finish(acc, prec)


def delta_inv(a):
    """``delta^{-1} = 1/(k+l) (dx^i (x) 1) i_a(d_i)`` on terms of degrees (k, l)."""
    acc = {}
    for (nu, alpha, forms), c in a.terms.items():
        l = len(forms)
        if not l:
            continue
        k = sum(alpha)
        scale = Fraction(1, k + l)
        for p, i in enumerate(forms):
            kout = forms[:p] + forms[p + 1 :]
            beta = alpha[:i] + (alpha[i] + 1,) + alpha[i + 1 :]
            _acc(acc, (nu, beta, kout), c * (scale if p % 2 == 0 else -scale))
    prec = None if a.prec is None else a.prec + 1
    return a.alg._finish(acc, prec)


def sigma_project(a):
    """Projection onto symmetric and antisymmetric degree zero (a formal function)."""
    zero = (0,) * a.alg.dim
    terms = {k: c for k, c in a.terms.items() if k[1] == zero and not k[2]}
    return WeylElement(a.alg, terms, a.prec)


def insert_field(kind, X, a):
    """``i_s(X)`` (fiber derivative) or ``i_a(X)`` (signed contraction of the form part)."""
    acc = {}
    if kind in ("symmetric", "s"):
        for (nu, alpha, forms), c in a.terms.items():
            for i, e in enumerate(alpha):
                if not e or X[i].is_zero():
                    continue
                beta = alpha[:i] + (e - 1,) + alpha[i + 1 :]
                _acc(acc, (nu, beta, forms), c * X[i] * e)
        prec = None if a.prec is None else a.prec - 1
    elif kind in ("antisymmetric", "a"):
        for (nu, alpha, forms), c in a.terms.items():
            for p, i in enumerate(forms):
                if X[i].is_zero():
                    continue
                v = c * X[i]
                _acc(acc, (nu, alpha, forms[:p] + forms[p + 1 :]), v if p % 2 == 0 else -v)
        prec = a.prec
    else:
        raise ValueError(f"unknown insertion kind {kind!r}")
    return a.alg._finish(acc, prec)


# ---------------------------------------------------------------------------
# nabla, curvature, Lie derivative, D
# ---------------------------------------------------------------------------

def _covariant_parts(geom, a, i, acc, wrap):
    """Accumulate ``wrap(nabla_{d_i} term)`` for every term of ``a``."""
    gt = geom._gamma_terms
    n = geom.dim
    for (nu, alpha, forms), c in a.terms.items():
        target = wrap(nu, alpha, forms)
        if target is None:
            continue
        d = c.partial(i)
        if not d.is_zero():
            target(alpha, d)
        for k in range(n):
            ek = alpha[k]
            if not ek:
                continue
            base = alpha[:k] + (ek - 1,) + alpha[k + 1 :]
            for j in range(n):
                for kk, g in gt[(i, j)]:
                    if kk != k:
                        continue
                    beta = base[:j] + (base[j] + 1,) + base[j + 1 :]
                    target(beta, -(g * c) * ek)


def nabla_operator(geom, a):
    """``nabla = (1 (x) dx^i) nabla_{d_i}``; the Christoffel action on the form part
    drops out because the connection is torsion-free."""
    acc = {}
    for i in range(geom.dim):

        def wrap(nu, alpha, forms, i=i):
            w = wedge((i,), forms)
            if w is None:
                return None
            sign, kout = w

            def put(beta, v):
                _acc(acc, (nu, beta, kout), -v if sign < 0 else v)

            return put

        _covariant_parts(geom, a, i, acc, wrap)
    return a.alg._finish(acc, a.prec)


def sym_cov_derivative(geom, a):
    """Symmetric covariant derivative ``D = dx^i \\/ nabla_{d_i}`` on an element of W (x) Lambda."""
    if not isinstance(a, WeylElement):
        raise TypeError("pass an element; use symmetric_one_form to lift component lists")
    acc = {}
    n = geom.dim
    for i in range(n):

        def wrap(nu, alpha, forms, i=i):
            def put(beta, v):
                gamma = beta[:i] + (beta[i] + 1,) + beta[i + 1 :]
                _acc(acc, (nu, gamma, forms), v)

            return put

        _covariant_parts(geom, a, i, acc, wrap)
    prec = None if a.prec is None else a.prec + 1
    return a.alg._finish(acc, prec)


def symmetric_one_form(alg, comps):
    """``theta (x) 1 = theta_j y^j``; ``comps`` may be ``{nu_power: components}``."""
    if not isinstance(comps, dict):
        comps = {0: comps}
    terms = {}
    n = alg.dim
    for p, cs in comps.items():
        for j, c in enumerate(cs):
            c = alg.ring.coerce(c)
            if not c.is_zero():
                e = [0] * n
                e[j] = 1
                terms[(p, tuple(e), ())] = c
    return alg.element(terms)


def curvature_element(geom, alg):
    """``R = 1/4 omega_it R^t_jkl y^i y^j (x) dx^k ^ dx^l``."""
    n = geom.dim
    Rm = geom.riemann
    w = geom.omega
    acc = {}
    quarter = Fraction(1, 4)
    for i in range(n):
        for j in range(n):
            e = [0] * n
            e[i] += 1
            e[j] += 1
            e = tuple(e)
            for k in range(n):
                for l in range(k + 1, n):
                    v = geom.ring.zero
                    for t in range(n):
                        if not w[i][t].is_zero() and not Rm[t][j][k][l].is_zero():
                            v = v + w[i][t] * Rm[t][j][k][l]
                    if v.is_zero():
                        continue
                    # the (k,l) and (l,k) orderings contribute equally
                    _acc(acc, (0, e, (k, l)), v * (2 * quarter))
    return alg._finish(acc, None)


def lie_derivative(X, a):
    """Tensorial Lie derivative on coefficients, fiber (covariant) slots and forms."""
    n = a.alg.dim
    dX = [[X[k].partial(j) for j in range(n)] for k in range(n)]  # dX[k][j] = d_j X^k
    acc = {}
    raw = {}
    for (nu, alpha, forms), c in a.terms.items():
        v = X.apply(c)
        if not v.is_zero():
            _acc(acc, (nu, alpha, forms), v)
        for k in range(n):
            ek = alpha[k]
            if not ek:
                continue
            base = alpha[:k] + (ek - 1,) + alpha[k + 1 :]
            for j in range(n):
                if dX[k][j].is_zero():
                    continue
                beta = base[:j] + (base[j] + 1,) + base[j + 1 :]
                _acc(acc, (nu, beta, forms), c * dX[k][j] * ek)
        for p, k in enumerate(forms):
            for j in range(n):
                if dX[k][j].is_zero():
                    continue
                new = forms[:p] + (j,) + forms[p + 1 :]
                if len(set(new)) < len(new):
                    continue
                _acc(raw, (nu, alpha, new), c * dX[k][j])
    for key, v in raw.items():
        nu, alpha, forms = key
        order = sorted(range(len(forms)), key=lambda t: forms[t])
        sign = _perm_sign(order)
        _acc(acc, (nu, alpha, tuple(sorted(forms))), v if sign > 0 else -v)
    return a.alg._finish(acc, a.prec)


def _perm_sign(perm):
    sign = 1
    perm = list(perm)
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


@dataclass(frozen=True)
class SymplecticCheck:
    is_symplectic: bool
    theta: tuple
    lie_omega: WeylElement

    def __bool__(self):
        return self.is_symplectic


def check_symplectic(geom, X, alg=None):
    """Computes ``L_X omega`` and ``theta_X = i_X omega``."""
    alg = alg or geom.algebra(2)
    w = two_form(alg, geom.omega)
    lie = lie_derivative(X, w)
    theta = tuple(geom.contract_omega(X))
    return SymplecticCheck(lie.is_zero(), theta, lie)
