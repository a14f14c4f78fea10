"""Symmetries of Fedosov star products: affine fields, invariance, quasi-inner
potentials, quantum Hamiltonians, the lambda-cocycle and quantum momentum maps."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import sympy

from .calculus import (
    VectorField,
    check_symplectic,
    curvature_element,
    delta,
    delta_inv,
    exterior_d,
    insert_field,
    lie_derivative,
    nabla_operator,
    one_form,
    sym_cov_derivative,
    symmetric_one_form,
    two_form,
)
from .fedosov import EngineConsistencyError, FedosovSetup, normalize_triple
from .scalar import RationalFunction, parse_expression
from .weyl import WeylElement, iter_monomials

__all__ = [
    "NotSymplectic",
    "NotADerivation",
    "ActionError",
    "Absent",
    "LieAction",
    "Cochain",
    "SXResult",
    "s_x_and_t_x",
    "GeneratorReport",
    "InvarianceReport",
    "invariance_report",
    "cartan_verify",
    "integrate_closed_one_form",
    "quasi_inner_potential",
    "quantum_hamiltonian",
    "semisimple_hamiltonian",
    "classical_mm_check",
    "lambda_cocycle",
    "ce_differential",
    "solve_qmm",
    "strong_invariance_check",
    "lie_xr_verify",
    "field_report",
    "leibniz_residual",
    "lie_on_function",
    "default_probes",
    "default_probe_pairs",
    "pair_form",
    "one_form_on_field",
    "t_x_via_curvature",
    "cartan_probe_basis",
]


class NotSymplectic(ValueError):
    pass


class NotADerivation(ValueError):
    pass


class ActionError(ValueError):
    pass


@dataclass(frozen=True)
class Absent:
    """A well-defined negative outcome carrying a witness."""

    reason: str
    witness: object = None

    def __bool__(self):
        return False


# ---------------------------------------------------------------------------
# Lie algebra actions and cochains
# ---------------------------------------------------------------------------

class LieAction:
    """Basis names, structure constants ``[e_i, e_j] = sum_k c[i][j][k] e_k``, and fields X_{e_i}.

    The map ``xi -> X_xi`` must be an anti-homomorphism: ``[X_xi, X_eta] = -X_{[xi, eta]}``.
    """

    def __init__(self, geom, basis, brackets, fields, J0=None, *, check=True):
        self.geom = geom
        self.basis = list(basis)
        d = len(self.basis)
        if d == 0:
            raise ActionError("empty Lie algebra basis")
        self.dim = d
        self.c = [[[Fraction(0)] * d for _ in range(d)] for _ in range(d)]
        for (i, j), combo in brackets.items():
            for k, v in combo.items():
                self.c[i][j][k] = Fraction(v)
        self.fields = [f if isinstance(f, VectorField) else VectorField.of(geom.ring, f) for f in fields]
        if len(self.fields) != d:
            raise ActionError("one vector field per basis element is required")
        self.J0 = J0
        if check:
            self._validate()

    def _validate(self):
        d, c = self.dim, self.c
        for i in range(d):
            for j in range(d):
                for k in range(d):
                    if c[i][j][k] != -c[j][i][k]:
                        raise ActionError(
                            f"structure constants not antisymmetric at [{self.basis[i]},{self.basis[j]}]"
                        )
        for i, j, k in itertools.combinations(range(d), 3):
            for m in range(d):
                v = Fraction(0)
                for l in range(d):
                    v += c[j][k][l] * c[i][l][m] + c[k][i][l] * c[j][l][m] + c[i][j][l] * c[k][l][m]
                if v:
                    raise ActionError("structure constants violate the Jacobi identity")
        for i in range(d):
            if not check_symplectic(self.geom, self.fields[i]).is_symplectic:
                raise ActionError(f"field for {self.basis[i]} is not symplectic")
        for i in range(d):
            for j in range(i + 1, d):
                lhs = self.fields[i].bracket(self.fields[j])
                rhs = self.combo_field(self.c[i][j])
                if lhs != VectorField(-v for v in rhs):
                    raise ActionError(
                        f"[X_{self.basis[i]}, X_{self.basis[j]}] != -X_[{self.basis[i]},{self.basis[j]}]"
                    )

    def combo_field(self, coeffs):
        out = VectorField([self.geom.ring.zero] * self.geom.dim)
        for k, v in enumerate(coeffs):
            if v:
                out = out + self.fields[k] * self.geom.ring.coerce(v)
        return out

    def bracket(self, i, j):
        return self.c[i][j]

    def is_abelian(self):
        return all(not v for row in self.c for col in row for v in col)

    def __repr__(self):
        return f"<LieAction basis={self.basis}>"


class Cochain:
    """Alternating k-cochain on the basis, values are formal functions."""

    def __init__(self, k, values, action):
        self.k = k
        self.action = action
        self.values = {}
        for key, v in values.items():
            key = tuple(key)
            if len(set(key)) < len(key):
                continue
            perm = sorted(range(len(key)), key=lambda t: key[t])
            sign = _perm_sign(perm)
            skey = tuple(sorted(key))
            v = v if sign > 0 else -v
            if skey in self.values:
                self.values[skey] = self.values[skey] + v
            else:
                self.values[skey] = v

    def __getitem__(self, key):
        key = (key,) if isinstance(key, int) else tuple(key)
        if len(set(key)) < len(key):
            return None
        perm = sorted(range(len(key)), key=lambda t: key[t])
        v = self.values.get(tuple(sorted(key)))
        if v is None:
            return None
        return v if _perm_sign(perm) > 0 else -v

    def items(self):
        return sorted(self.values.items())

    def is_zero(self):
        return all(v.is_zero() for v in self.values.values())

    def __sub__(self, other):
        vals = dict(self.values)
        for k, v in other.values.items():
            vals[k] = vals[k] - v if k in vals else -v
        return Cochain(self.k, vals, self.action)

    def __add__(self, other):
        vals = dict(self.values)
        for k, v in other.values.items():
            vals[k] = vals[k] + v if k in vals else v
        return Cochain(self.k, vals, self.action)

    def is_scalar(self):
        return all(all(c.is_constant() for c in v.nu_coefficients().values()) for v in self.values.values())

    def label(self, key):
        return "(" + ",".join(self.action.basis[i] for i in key) + ")"


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
# S_X and T_X
# ---------------------------------------------------------------------------

@dataclass
class SXResult:
    S: list = field(repr=False)
    T: WeylElement = None

    def is_zero(self):
        return self.T.is_zero()


def _require_symplectic(geom, X):
    chk = check_symplectic(geom, X)
    if not chk.is_symplectic:
        raise NotSymplectic(f"vector field {X} is not symplectic")
    return chk


def s_x_and_t_x(geom, X, alg=None):
    """``S_X = L_X nabla`` and ``T_X(W,U;V) = omega(W, S_X(V,U))`` as an element of degs 2, dega 1."""
    _require_symplectic(geom, X)
    alg = alg or geom.algebra(4)
    n = geom.dim
    G = geom.gamma
    dX = [[X[k].partial(i) for i in range(n)] for k in range(n)]
    S = [[[geom.ring.zero] * n for _ in range(n)] for _ in range(n)]
    for k in range(n):
        for i in range(n):
            for j in range(n):
                v = dX[k][i].partial(j)
                for l in range(n):
                    v = v + X[l] * G[k][i][j].partial(l) + G[k][l][j] * dX[l][i] + G[k][i][l] * dX[l][j] - G[l][i][j] * dX[k][l]
                S[k][i][j] = v
    w = geom.omega
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if S[k][i][j] != S[k][j][i]:
                    raise EngineConsistencyError("S_X not symmetric")
    for wi in range(n):
        for u in range(n):
            for v in range(n):
                lhs = sum((w[wi][k] * S[k][u][v] for k in range(n)), geom.ring.zero)
                rhs = sum((w[k][v] * S[k][u][wi] for k in range(n)), geom.ring.zero)
                if lhs != -rhs:
                    raise EngineConsistencyError("omega(W, S_X(U,V)) != -omega(S_X(U,W), V)")
    acc = {}
    half = Fraction(1, 2)
    for a in range(n):
        for b in range(n):
            e = [0] * n
            e[a] += 1
            e[b] += 1
            e = tuple(e)
            for m in range(n):
                v = geom.ring.zero
                for k in range(n):
                    if not w[a][k].is_zero() and not S[k][m][b].is_zero():
                        v = v + w[a][k] * S[k][m][b]
                if not v.is_zero():
                    key = (0, e, (m,))
                    acc[key] = acc[key] + v * half if key in acc else v * half
    T = alg._finish(acc, None)
    if not delta(T).is_zero():
        raise EngineConsistencyError("delta T_X != 0")
    if not (nabla_operator(geom, T) - lie_derivative(X, curvature_element(geom, alg))).is_zero():
        raise EngineConsistencyError("nabla T_X != L_X R")
    for a in _commutator_probes(alg):
        lhs = nabla_operator(geom, lie_derivative(X, a)) - lie_derivative(X, nabla_operator(geom, a))
        if not (lhs - alg.ad_nu(T, a)).is_zero():
            raise EngineConsistencyError(f"[nabla, L_X] != (1/nu) ad(T_X) on {a}")
    return SXResult(S, T)


def _commutator_probes(alg):
    n = alg.dim
    out = [alg.y(i) for i in range(n)]
    out += [alg.circ(alg.y(i), alg.y(j)) for i in range(n) for j in range(i, n)]
    out += [alg.function(alg.ring.gen(i)) + alg.dx(i) for i in range(n)]
    return out


def t_x_via_curvature(geom, X, alg):
    """``i_a(X) R - nabla(1/2 D theta_X (x) 1)``."""
    theta = symmetric_one_form(alg, geom.contract_omega(X))
    R = curvature_element(geom, alg)
    return insert_field("antisymmetric", X, R) - nabla_operator(geom, sym_cov_derivative(geom, theta)) * Fraction(1, 2)


# ---------------------------------------------------------------------------
# formal-function helpers
# ---------------------------------------------------------------------------

def lie_on_function(X, f):
    """``L_X`` on a formal function, coefficientwise."""
    terms = {}
    for k, c in f.nu_coefficients().items():
        v = X.apply(c)
        if not v.is_zero():
            terms[(k, (0,) * f.alg.dim, ())] = v
    return f.alg._finish(terms, f.prec)


def default_probes(ring, max_degree=3):
    out = []
    n = ring.dim
    for d in range(1, max_degree + 1):
        for e in iter_monomials(n, d):
            m = ring.one
            for i, k in enumerate(e):
                if k:
                    m = m * ring.gen(i) ** k
            out.append(m)
    return out


def default_probe_pairs(ring, max_degree=3):
    ps = default_probes(ring, max_degree)
    return [(f, g) for f in ps for g in ps]


def one_form_on_field(alg, geom, X, Omega):
    """Components of ``i_X(omega + Omega)`` as ``{nu_power: [components]}``."""
    n = geom.dim
    out = {0: geom.contract_omega(X)}
    for (nu, _, forms), c in Omega.terms.items():
        i, j = forms
        comps = out.setdefault(nu, [geom.ring.zero] * n)
        # i_X (c dx^i ^ dx^j) = c (X^i dx^j - X^j dx^i)
        comps[j] = comps[j] + c * X[i]
        comps[i] = comps[i] - c * X[j]
    return {k: v for k, v in out.items() if any(not c.is_zero() for c in v)}


def pair_form(alg, geom, Omega, X, Y):
    """``(omega + Omega)(X, Y)`` as a formal function."""
    n = geom.dim
    terms = {}
    v = geom.ring.zero
    for i in range(n):
        for j in range(n):
            if not geom.omega[i][j].is_zero():
                v = v + geom.omega[i][j] * X[i] * Y[j]
    zero = (0,) * n
    if not v.is_zero():
        terms[(0, zero, ())] = v
    for (nu, _, (i, j)), c in Omega.terms.items():
        w = c * (X[i] * Y[j] - X[j] * Y[i])
        key = (nu, zero, ())
        terms[key] = terms[key] + w if key in terms else w
    return alg.element(terms)


def _contract_two_form(Omega, X):
    acc = {}
    for (nu, alpha, (i, j)), c in Omega.terms.items():
        for slot, other, sign in ((i, j, 1), (j, i, -1)):
            v = c * X[slot]
            if v.is_zero():
                continue
            key = (nu, alpha, (other,))
            v = v if sign > 0 else -v
            acc[key] = acc[key] + v if key in acc else v
    return Omega.alg._finish(acc, Omega.prec)


# ---------------------------------------------------------------------------
# invariance
# ---------------------------------------------------------------------------

@dataclass
class GeneratorReport:
    name: str
    X: VectorField
    T_X: WeylElement
    lie_Omega: WeylElement
    lie_s: WeylElement
    is_derivation: bool
    probe_agrees: bool = True
    witness: tuple | None = None
    witness_residual: WeylElement | None = None


@dataclass
class InvarianceReport:
    generators: list
    normalized: bool = False

    @property
    def is_g_invariant(self):
        return all(g.is_derivation for g in self.generators)

    def __getitem__(self, name):
        for g in self.generators:
            if g.name == name:
                return g
        raise KeyError(name)


def _normalized(setup):
    s = setup.s
    if s.homogeneous(degs=1).is_zero() and s.min_degree() >= 4:
        return setup, False
    return normalize_triple(setup), True


def leibniz_residual(setup, X, f, g):
    fg = setup.star(f, g)
    return lie_on_function(X, fg) - setup.star(lie_on_function(X, setup.function(f)), g) - setup.star(
        f, lie_on_function(X, setup.function(g))
    )


def _generator_report(setup, name, X, probe_pairs):
    _require_symplectic(setup.geom, X)
    T = s_x_and_t_x(setup.geom, X, setup.alg).T
    lie_Om = lie_derivative(X, setup.Omega)
    lie_s = lie_derivative(X, setup.s)
    is_der = T.is_zero() and lie_Om.is_zero() and lie_s.is_zero()
    rep = GeneratorReport(name, X, T, lie_Om, lie_s, is_der)
    for f, g in probe_pairs:
        res = leibniz_residual(setup, X, f, g)
        if not res.is_zero():
            if is_der:
                raise EngineConsistencyError(
                    f"conditions say {name} acts as a derivation but Leibniz fails on ({f}, {g})"
                )
            rep.witness = (f, g)
            rep.witness_residual = res
            break
    else:
        if not is_der:
            rep.probe_agrees = False
    return rep


def invariance_report(setup, action, probe_pairs=None):
    """Per-generator affinity/invariance test, cross-validated by Leibniz probes."""
    setup, normalized = _normalized(setup)
    if probe_pairs is None:
        probe_pairs = default_probe_pairs(setup.geom.ring, 3)
    gens = [_generator_report(setup, n, X, probe_pairs) for n, X in zip(action.basis, action.fields)]
    return InvarianceReport(gens, normalized)


def field_report(setup, X, name="X", probe_pairs=None):
    setup, _ = _normalized(setup)
    if probe_pairs is None:
        probe_pairs = default_probe_pairs(setup.geom.ring, 3)
    return _generator_report(setup, name, X, probe_pairs)


# ---------------------------------------------------------------------------
# deformed Cartan formula
# ---------------------------------------------------------------------------

@dataclass
class CartanReport:
    residuals: list
    probes: int

    @property
    def passes(self):
        return all(r.is_zero() for _, r in self.residuals)

    def failures(self):
        return [(p, r) for p, r in self.residuals if not r.is_zero()]


def cartan_probe_basis(alg, coord_degree=2, fiber_degree=None):
    """Coordinate monomials times fiber monomials (with nu) of Deg <= N times form generators."""
    n = alg.dim
    ring = alg.ring
    if fiber_degree is None:
        fiber_degree = alg.N
    coords = [ring.one] + default_probes(ring, coord_degree)
    fibers = []
    for d in range(fiber_degree + 1):
        for k in range(d // 2 + 1):
            for e in iter_monomials(n, d - 2 * k):
                fibers.append((k, e))
    forms = [()] + [(i,) for i in range(n)] + list(itertools.combinations(range(n), 2))
    out = []
    for c in coords:
        for k, e in fibers:
            for K in forms:
                out.append(alg.term(c, nu=k, fiber=e, forms=K))
    return out


def cartan_verify(setup, X, probes=None):
    """Residual of ``L_X - [D i_a(X) + i_a(X) D - (1/nu) ad(theta (x) 1 + 1/2 D theta (x) 1 - i_a(X) r)]``."""
    geom, alg = setup.geom, setup.alg
    _require_symplectic(geom, X)
    theta = symmetric_one_form(alg, geom.contract_omega(X))
    gen = theta + sym_cov_derivative(geom, theta) * Fraction(1, 2) - insert_field("antisymmetric", X, setup.r)
    if probes is None:
        probes = cartan_probe_basis(alg)
    res = []
    for a in probes:
        lhs = lie_derivative(X, a)
        ia = insert_field("antisymmetric", X, a)
        rhs = setup.D(ia) + insert_field("antisymmetric", X, setup.D(a)) - alg.ad_nu(gen, a)
        res.append((a, lhs - rhs))
    return CartanReport(res, len(probes))


# ---------------------------------------------------------------------------
# potentials of closed one-forms
# ---------------------------------------------------------------------------

def _to_sympy(f, names, symbols):
    names = dict(zip(names, symbols))
    num = sympy.sympify(str(f.num).replace("^", "**"), locals=names)
    den = sympy.sympify(str(f.den).replace("^", "**"), locals=names)
    return num, den


def _sympy_str(expr, symbols, names):
    expr = expr.subs({s: sympy.Symbol(nm) for s, nm in zip(symbols, names)})
    return str(expr).replace("**", "^")


def _from_sympy(expr, ring, symbols):
    num, den = sympy.fraction(sympy.cancel(sympy.together(expr)))
    n = parse_expression(_sympy_str(sympy.expand(num), symbols, ring.names), ring)
    d = parse_expression(_sympy_str(sympy.expand(den), symbols, ring.names), ring)
    return n / d


def _radial(alpha, ring):
    """Radial homotopy ``sum_i x^i int_0^1 alpha_i(t x) dt`` for polynomial components."""
    out = ring.zero
    ctx = ring.ctx
    n = ring.dim
    for i, a in enumerate(alpha):
        if a.is_zero():
            continue
        d = {}
        for exps, c in zip(a.num.monoms(), a.num.coeffs()):
            deg = sum(exps)
            e = list(exps)
            e[i] += 1
            d[tuple(e)] = c / (deg + 1)
        poly = ctx.from_dict(d)
        out = out + RationalFunction.from_parts(poly, ctx.constant(1))
    return out


def integrate_closed_one_form(geom, alpha):
    """A rational potential ``f`` with ``df = alpha`` and ``f(0) = 0``, or :class:`Absent`."""
    ring = geom.ring
    n = geom.dim
    alpha = [ring.coerce(a) for a in alpha]
    for i in range(n):
        for j in range(i + 1, n):
            if alpha[j].partial(i) != alpha[i].partial(j):
                raise ValueError("one-form is not closed")
    if all(a.is_polynomial() for a in alpha):
        f = _radial(alpha, ring)
    else:
        syms = sympy.symbols(" ".join(f"_v{i}" for i in range(n)))
        if n == 1:
            syms = (syms,)
        f = ring.zero
        rest = list(alpha)
        for i in range(n):
            if rest[i].is_zero():
                continue
            num, den = _to_sympy(rest[i], ring.names, syms)
            others = [s for k, s in enumerate(syms) if k != i]
            dom = sympy.QQ.frac_field(*others) if others else sympy.QQ
            P = sympy.Poly(num, syms[i], domain=dom)
            Q = sympy.Poly(den, syms[i], domain=dom)
            q, rem = P.div(Q)
            rat, log_part = sympy.integrals.rationaltools.ratint_ratpart(rem, Q, syms[i])
            if log_part != 0:
                return Absent(
                    "closed one-form has no potential among rational functions",
                    witness={
                        "component": i,
                        "one_form": [str(a) for a in alpha],
                        "non_rational_part": _sympy_str(log_part, syms, ring.names),
                    },
                )
            poly_int = sympy.integrate(q.as_expr(), syms[i])
            F = _from_sympy(poly_int + rat, ring, syms)
            f = f + F
            rest = [a - F.partial(k) for k, a in enumerate(rest)]
        if any(not v.is_zero() for v in rest):
            raise EngineConsistencyError("sequential integration left a remainder")
    for i in range(n):
        if f.partial(i) != alpha[i]:
            raise EngineConsistencyError("potential does not reproduce the one-form")
    origin = [0] * n
    f = f - ring.coerce(f.evaluate(origin))
    return f


@dataclass
class Potential:
    f: WeylElement
    checked: list

    def __bool__(self):
        return True


def quasi_inner_potential(setup, X, probes=None, *, probe_pairs=None):
    """``f`` with ``df = i_X(omega + Omega)`` so that ``L_X = -(1/nu) ad_*(f)``, or :class:`Absent`."""
    rep = field_report(setup, X, probe_pairs=probe_pairs if probe_pairs is not None else [])
    if not rep.is_derivation:
        raise NotADerivation(f"L_X is not a derivation of the star product for X = {X}")
    alg, geom = setup.alg, setup.geom
    comps = one_form_on_field(alg, geom, X, setup.Omega)
    coeffs = {}
    for k, alpha in sorted(comps.items()):
        p = integrate_closed_one_form(geom, alpha)
        if isinstance(p, Absent):
            return Absent(p.reason, {"nu_order": k, **p.witness})
        if not p.is_zero():
            coeffs[k] = p
    f = alg.function(coeffs)
    if probes is None:
        probes = default_probes(geom.ring, 2)
    checked = []
    for g in probes:
        lhs = lie_on_function(X, setup.function(g))
        rhs = -setup.commutator_nu(f, g)
        if not (lhs - rhs).is_zero():
            raise EngineConsistencyError(f"L_X g != -(1/nu) ad_*(f) g for g = {g}")
        checked.append(g)
    return Potential(f, checked)


# ---------------------------------------------------------------------------
# quantum Hamiltonians
# ---------------------------------------------------------------------------

@dataclass
class QuantumHamiltonian:
    J: Cochain
    ambiguity_dim: int
    checked: list

    def __bool__(self):
        return True


def _verify_hamiltonian(setup, action, J, probes):
    checked = []
    for i, X in enumerate(action.fields):
        for g in probes:
            lhs = -lie_on_function(X, setup.function(g))
            rhs = setup.commutator_nu(J[i], g)
            if not (lhs - rhs).is_zero():
                raise EngineConsistencyError(
                    f"rho({action.basis[i]}) g != (1/nu) ad_*(J) g for g = {g}"
                )
            checked.append((i, g))
    return checked


def quantum_hamiltonian(setup, action, probes=None, J0=None):
    """Solve ``dJ_xi = i_{X_xi}(omega + Omega)`` per generator; unique up to C^1(g, C)[[nu]].

    A given classical ``J0`` (checked against ``i_X omega``) replaces the nu^0 potential;
    otherwise every potential vanishes at the origin.
    """
    report = invariance_report(setup, action, probe_pairs=[])
    if not report.is_g_invariant:
        bad = [g.name for g in report.generators if not g.is_derivation]
        raise NotADerivation(f"star product is not invariant under {', '.join(bad)}")
    vals = {}
    for i, X in enumerate(action.fields):
        comps = one_form_on_field(setup.alg, setup.geom, X, setup.Omega)
        coeffs = {}
        for k, alpha in sorted(comps.items()):
            if k == 0 and J0 is not None:
                j0 = setup.geom.ring.coerce(J0[i])
                if any(j0.partial(t) != alpha[t] for t in range(setup.geom.dim)):
                    raise ActionError(f"J0({action.basis[i]}) is not a Hamiltonian for its field")
                if not j0.is_zero():
                    coeffs[0] = j0
                continue
            p = integrate_closed_one_form(setup.geom, alpha)
            if isinstance(p, Absent):
                return Absent(p.reason, {"generator": action.basis[i], "nu_order": k, **p.witness})
            if not p.is_zero():
                coeffs[k] = p
        vals[(i,)] = setup.alg.function(coeffs)
    J = Cochain(1, vals, action)
    if probes is None:
        probes = default_probes(setup.geom.ring, 2)
    checked = _verify_hamiltonian(setup, action, J, probes)
    return QuantumHamiltonian(J, action.dim, checked)


def _bracket_decomposition(action):
    """For each basis element, coefficients ``{(a, b): t}`` with ``e_i = sum t [e_a, e_b]``."""
    d = action.dim
    pairs = list(itertools.combinations(range(d), 2))
    M = sympy.Matrix(d, len(pairs), lambda k, p: sympy.Rational(action.c[pairs[p][0]][pairs[p][1]][k].numerator,
                                                                 action.c[pairs[p][0]][pairs[p][1]][k].denominator))
    out = []
    for i in range(d):
        rhs = sympy.Matrix([1 if k == i else 0 for k in range(d)])
        try:
            sol, params = M.gauss_jordan_solve(rhs)
        except ValueError:
            return None
        sol = sol.subs({p: 0 for p in params})
        out.append({pairs[p]: Fraction(int(sympy.fraction(sol[p])[0]), int(sympy.fraction(sol[p])[1]))
                    for p in range(len(pairs)) if sol[p] != 0})
    return out


def semisimple_hamiltonian(setup, action, probes=None):
    """For perfect ``g = [g, g]``: ``J_{e_i} = sum t (omega + Omega)(X_a, X_b)`` where ``e_i = sum t [e_a, e_b]``."""
    dec = _bracket_decomposition(action)
    if dec is None:
        return Absent("Lie algebra is not perfect; [g, g] != g")
    vals = {}
    for i, combo in enumerate(dec):
        f = setup.alg.zero()
        for (a, b), t in combo.items():
            f = f + pair_form(setup.alg, setup.geom, setup.Omega, action.fields[a], action.fields[b]) * t
        vals[(i,)] = f
    # verify dJ = i_X(omega + Omega) symbolically
    for i, X in enumerate(action.fields):
        target = one_form(setup.alg, one_form_on_field(setup.alg, setup.geom, X, setup.Omega))
        if not (exterior_d(vals[(i,)]) - target).is_zero():
            raise EngineConsistencyError(f"semisimple assembly fails dJ = i_X(omega + Omega) for {action.basis[i]}")
    J = Cochain(1, vals, action)
    if probes is None:
        probes = default_probes(setup.geom.ring, 1)
    checked = _verify_hamiltonian(setup, action, J, probes)
    return QuantumHamiltonian(J, action.dim, checked)


# ---------------------------------------------------------------------------
# classical checks
# ---------------------------------------------------------------------------

@dataclass
class ClassicalCheck:
    hamiltonian: bool
    equivariant: bool
    failures: list

    def __bool__(self):
        return self.hamiltonian and self.equivariant


def classical_mm_check(action, J0):
    """``dJ0_xi = i_{X_xi} omega`` and ``{J0_xi, J0_eta} = J0_[xi,eta]``."""
    geom = action.geom
    ring = geom.ring
    J0 = [ring.coerce(j) for j in J0]
    fails = []
    ham = True
    for i, X in enumerate(action.fields):
        th = geom.contract_omega(X)
        if any(J0[i].partial(k) != th[k] for k in range(geom.dim)):
            ham = False
            fails.append(("hamiltonian", action.basis[i]))
    eq = True
    for i in range(action.dim):
        for j in range(i + 1, action.dim):
            lhs = geom.poisson(J0[i], J0[j])
            rhs = ring.zero
            for k, v in enumerate(action.c[i][j]):
                if v:
                    rhs = rhs + J0[k] * ring.coerce(v)
            if lhs != rhs:
                eq = False
                fails.append(("equivariance", action.basis[i], action.basis[j], lhs - rhs))
    return ClassicalCheck(ham, eq, fails)


# ---------------------------------------------------------------------------
# lambda cocycle and CE differential
# ---------------------------------------------------------------------------

def _combo(J, coeffs, alg):
    out = alg.zero()
    for k, v in enumerate(coeffs):
        if v:
            out = out + J[k] * v
    return out


def ce_differential(rep, c, action, setup=None):
    """Chevalley-Eilenberg differential for the trivial rep or ``rho(xi) = -L_{X_xi}``."""
    if rep not in ("trivial", "rho"):
        raise ValueError(f"unsupported representation {rep!r}")
    k = c.k
    d = action.dim
    alg = next(iter(c.values.values())).alg if c.values else (setup.alg if setup else None)
    if alg is None:
        return Cochain(k + 1, {}, action)
    out = {}
    for xs in itertools.combinations(range(d), k + 1):
        val = alg.zero()
        if rep == "rho":
            for i, xi in enumerate(xs):
                rest = xs[:i] + xs[i + 1 :]
                v = c[rest] if rest else c.values.get((), None)
                if v is None:
                    continue
                term = -lie_on_function(action.fields[xi], v)
                val = val + (term if i % 2 == 0 else -term)
        for i, j in itertools.combinations(range(k + 1), 2):
            rest = xs[:i] + xs[i + 1 : j] + xs[j + 1 :]
            br = action.c[xs[i]][xs[j]]
            for l, v in enumerate(br):
                if not v:
                    continue
                cv = c[(l,) + rest]
                if cv is None:
                    continue
                term = cv * v
                val = val + (term if (i + j) % 2 == 0 else -term)
        out[xs] = val
    return Cochain(k + 1, out, action)


@dataclass
class LambdaResult:
    lam: Cochain
    via_star: Cochain
    certified_nu_order: int

    def is_zero(self):
        return self.lam.is_zero()


def lambda_cocycle(setup, action, J):
    """``lambda(xi, eta)`` via star commutators and via ``(omega + Omega)(X_xi, X_eta) - J_[xi,eta]``."""
    if isinstance(J, QuantumHamiltonian):
        J = J.J
    alg = setup.alg
    d = action.dim
    explicit, starred = {}, {}
    cert = None
    for i, j in itertools.combinations(range(d), 2):
        Jb = _combo(J, action.c[i][j], alg)
        explicit[(i, j)] = pair_form(alg, setup.geom, setup.Omega, action.fields[i], action.fields[j]) - Jb
        st = setup.commutator_nu(J[i], J[j]) - Jb
        starred[(i, j)] = st
        o = st.certified_nu_order()
        cert = o if cert is None or (o is not None and o < cert) else cert
        if not (explicit[(i, j)] - st).is_zero():
            raise EngineConsistencyError(
                f"lambda({action.basis[i]},{action.basis[j]}) disagrees between the two formulas"
            )
    lam = Cochain(2, explicit, action)
    if not lam.is_scalar():
        raise EngineConsistencyError("lambda is not constant on the chart")
    if d >= 3 and not ce_differential("trivial", lam, action).is_zero():
        raise EngineConsistencyError("lambda is not a Chevalley-Eilenberg cocycle")
    return LambdaResult(lam, Cochain(2, starred, action), cert if cert is not None else setup.N // 2)


# ---------------------------------------------------------------------------
# quantum momentum mappings
# ---------------------------------------------------------------------------

@dataclass
class QMMResult:
    J: Cochain
    a: Cochain
    ambiguity_dim: int
    checked: list

    def __bool__(self):
        return True


def _frac(v):
    v = sympy.nsimplify(v)
    n, d = sympy.fraction(v)
    return Fraction(int(n), int(d))


def solve_qmm(setup, action, J, lam):
    """Solve ``delta_0 a = lambda`` order by order in nu; return ``J - a`` or :class:`Absent`."""
    if isinstance(J, QuantumHamiltonian):
        J = J.J
    if isinstance(lam, LambdaResult):
        lam = lam.lam
    alg = setup.alg
    d = action.dim
    pairs = list(itertools.combinations(range(d), 2))
    M = sympy.Matrix(len(pairs), d, lambda p, l: -sympy.Rational(action.c[pairs[p][0]][pairs[p][1]][l].numerator,
                                                                 action.c[pairs[p][0]][pairs[p][1]][l].denominator))
    rank = M.rank() if pairs else 0
    orders = set()
    for key in pairs:
        v = lam[key]
        if v is not None:
            orders |= set(v.nu_coefficients())
    a_vals = {(l,): {} for l in range(d)}
    for k in sorted(orders):
        rhs = []
        for key in pairs:
            c = lam[key].nu_coefficients().get(k) if lam[key] is not None else None
            v = c.constant_value() if c is not None else Fraction(0)
            rhs.append(sympy.Rational(v.numerator, v.denominator))
        b = sympy.Matrix(rhs)
        try:
            sol, params = M.gauss_jordan_solve(b)
        except ValueError:
            null = M.T.nullspace()
            wit = None
            for y in null:
                if (y.T * b)[0] != 0:
                    wit = y
                    break
            return Absent(
                "[lambda] != 0 in H^2_0(g, C)[[nu]]",
                witness={
                    "nu_order": k,
                    **{f"lambda({action.basis[i]},{action.basis[j]})": str(rhs[p]) for p, (i, j) in enumerate(pairs)},
                    "cocycle_functional": None if wit is None else [str(t) for t in wit],
                },
            )
        sol = sol.subs({p: 0 for p in params})
        for l in range(d):
            if sol[l] != 0:
                a_vals[(l,)][k] = alg.ring.coerce(_frac(sol[l]))
    a = Cochain(1, {key: alg.function(v) for key, v in a_vals.items()}, action)
    Ja = J - a
    checked = []
    for i, j in pairs:
        lhs = setup.commutator_nu(Ja[i], Ja[j])
        rhs = _combo(Ja, action.c[i][j], alg)
        if not (lhs - rhs).is_zero():
            raise EngineConsistencyError(f"J - a fails the momentum map equation on ({action.basis[i]},{action.basis[j]})")
        checked.append((i, j))
    return QMMResult(Ja, a, d - rank, checked)


@dataclass
class StrongInvariance:
    strongly_invariant: bool
    contractions: dict
    checked: list

    def __bool__(self):
        return self.strongly_invariant


def strong_invariance_check(setup, action, J0, probes=None):
    """``i_{X_xi} Omega = 0`` for all xi; when true, ``J0`` is checked as a quantum Hamiltonian."""
    cons = {}
    ok = True
    for name, X in zip(action.basis, action.fields):
        c = _contract_two_form(setup.Omega, X)
        cons[name] = c
        if not c.is_zero():
            ok = False
    checked = []
    if ok:
        J = Cochain(1, {(i,): setup.function(j) for i, j in enumerate(J0)}, action)
        if probes is None:
            probes = default_probes(setup.geom.ring, 2)
        checked = _verify_hamiltonian(setup, action, J, probes)
    return StrongInvariance(ok, cons, checked)


# ---------------------------------------------------------------------------
# L_X r
# ---------------------------------------------------------------------------

@dataclass
class LieXrReport:
    lie_r: WeylElement
    delta_equation: WeylElement
    s_equation: WeylElement
    recursion: WeylElement
    recursion_agrees: bool

    @property
    def passes(self):
        return self.delta_equation.is_zero() and self.s_equation.is_zero() and self.recursion_agrees


def lie_xr_verify(setup, X):
    """Check ``L_X r`` against both of its determining equations and their recursion."""
    geom, alg = setup.geom, setup.alg
    _require_symplectic(geom, X)
    r = setup.r
    L = lie_derivative(X, r)
    T = s_x_and_t_x(geom, X, alg).T
    LR = lie_derivative(X, setup.R)
    dOm = exterior_d(_contract_two_form(setup.Omega, X))
    ds = delta(lie_derivative(X, setup.s))

    def rhs(u):
        return nabla_operator(geom, u) - alg.ad_nu(r, u) - alg.ad_nu(T, r) + LR + dOm

    eq1 = delta(L) - rhs(L)
    eq2 = delta_inv(L) - lie_derivative(X, setup.s)
    u = alg.zero(prec=1)
    for _ in range(setup.N + 2):
        u = ds + delta_inv(rhs(u))
    agrees = (u - L).is_zero()
    return LieXrReport(L, eq1, eq2, u, agrees)
