"""Fedosov construction on a single chart: r, the Fedosov derivation, Taylor series,
star products, derivations from closed one-forms, and equivalence of triples."""

from __future__ import annotations

import threading
from fractions import Fraction
from dataclasses import dataclass, field

from .calculus import (
    ChartGeometry,
    GeometryError,
    curvature_element,
    delta,
    delta_inv,
    exterior_d,
    form_components,
    nabla_operator,
    one_form,
    sigma_project,
    two_form,
)
from .weyl import WeylElement, WeylError, is_central, truncate

__all__ = [
    "SetupError",
    "EngineConsistencyError",
    "FedosovSetup",
    "DerivationHandle",
    "ConnectionDifference",
    "Equivalence",
    "solve_r",
    "fedosov_D",
    "fedosov_D_inverse",
    "taylor_series",
    "star_product",
    "derivation_from_one_form",
    "connection_difference",
    "triple_equivalence",
    "normalize_triple",
]


class SetupError(ValueError):
    """Input data (Omega, s, A, ...) violate a precondition."""


class EngineConsistencyError(AssertionError):
    """An internal cross-check failed; indicates a bug, not bad input."""


def _as_function(alg, f):
    if isinstance(f, WeylElement):
        if f.alg != alg:
            raise WeylError("formal function belongs to another algebra")
        f.nu_coefficients()
        return f
    if isinstance(f, dict):
        return alg.function(f)
    return alg.function(alg.ring.coerce(f))


class FedosovSetup:
    """The data ``(nabla, Omega, s)`` at truncation order ``N`` with solved ``r``.

    ``Omega`` may be a central two-form element or ``{nu_power: matrix}``;
    ``s`` an element of W with ``sigma(s) = 0`` and minimal total degree 3.
    """

    def __init__(self, geom, order, Omega=None, s=None, *, name=""):
        if not isinstance(geom, ChartGeometry):
            raise TypeError("geom must be a ChartGeometry")
        self.geom = geom
        self.N = int(order)
        self.name = name
        self.alg = geom.algebra(self.N)
        alg = self.alg
        if Omega is None:
            Omega = alg.zero()
        elif isinstance(Omega, dict):
            Omega = two_form(alg, Omega)
        elif Omega.alg != alg:
            Omega = _rebase(Omega, alg)
        if s is None:
            s = alg.zero()
        elif s.alg != alg:
            s = _rebase(s, alg)
        self.Omega = Omega
        self.s = s
        self._validate()
        self.R = curvature_element(geom, alg)
        self._r = None
        self._lock = threading.RLock()
        self._tau = {}

    def _validate(self):
        Om, s = self.Omega, self.s
        for (nu, alpha, forms), _ in Om.terms.items():
            if any(alpha) or len(forms) != 2:
                raise SetupError("Omega must be a formal series of two-forms")
            if nu == 0:
                raise SetupError("Omega must start at order nu^1")
        if not exterior_d(Om).is_zero():
            raise SetupError("Omega not closed")
        for (nu, alpha, forms), _ in s.terms.items():
            if forms:
                raise SetupError("s must have antisymmetric degree 0")
            if not any(alpha):
                raise SetupError("s must satisfy sigma(s) = 0")
            if sum(alpha) + 2 * nu < 3:
                raise SetupError("s must have total degree at least 3")

    # ------------------------------------------------------------------ r
    @property
    def r(self):
        with self._lock:
            if self._r is None:
                self._r = self._solve_r()
            return self._r

    def _step(self, r):
        alg = self.alg
        rhs = nabla_operator(self.geom, r) - alg.ad_nu(r, r) * Fraction(1, 2) + self.R + self.Omega
        return delta(self.s) + delta_inv(rhs)

    def _solve_r(self, start=None):
        r = self.alg.zero(prec=1) if start is None else start
        for _ in range(self.N + 2):
            nxt = self._step(r)
            if start is None and nxt.prec is not None and nxt.prec >= self.N and nxt == r:
                break
            r = nxt
        return r

    def solve_r_from(self, start):
        """Re-run the fixed point from an arbitrary start (uniqueness check)."""
        r = start
        for _ in range(self.N + 2):
            r = self._step(r)
        return r

    def r_residual(self):
        """``delta r - (nabla r - (1/nu) r o r + R + 1 (x) Omega)`` and ``delta^{-1} r - s``."""
        r = self.r
        alg = self.alg
        eq = delta(r) - (nabla_operator(self.geom, r) - alg.ad_nu(r, r) * Fraction(1, 2) + self.R + self.Omega)
        return eq, delta_inv(r) - self.s

    # --------------------------------------------------------------- D, D^-1
    def E(self, a):
        return nabla_operator(self.geom, a) - self.alg.ad_nu(self.r, a)

    def D(self, a):
        return -delta(a) + self.E(a)

    def D_inv(self, a):
        """``-delta^{-1} sum_k Q^k a`` with ``Q = [delta^{-1}, nabla - (1/nu) ad(r)]``."""
        total = self.alg.zero()
        term = a
        for _ in range(self.N + 3):
            if term.min_degree() > self.N:
                break
            total = total + term
            term = delta_inv(self.E(term)) + self.E(delta_inv(term))
        else:
            raise EngineConsistencyError("D^-1 series did not terminate")
        extra = delta_inv(self.E(term)) + self.E(delta_inv(term))
        if not extra.is_zero():
            raise EngineConsistencyError("D^-1 series: extra term is nonzero")
        return -delta_inv(total + term)

    # ------------------------------------------------------------------ tau
    def _tau_pure(self, f, target):
        """Fedosov-Taylor series of a nu-free rational function, certified to ``target``."""
        key = (str(f.num), str(f.den))
        with self._lock:
            hit = self._tau.get(key)
        if hit is not None and (hit.prec is None or hit.prec >= target):
            return hit
        alg = self.alg
        inc = alg.function(f)
        total = inc
        for _ in range(target + 2):
            inc = delta_inv(self.E(inc))
            if inc.is_zero() and (inc.prec is None or inc.prec >= target):
                break
            if inc.min_degree() > target:
                total = truncate(total + inc, target)
                break
            total = total + inc
        else:
            if not inc.is_zero():
                raise EngineConsistencyError("Taylor series recursion did not terminate")
        with self._lock:
            prev = self._tau.get(key)
            if prev is None or (prev.prec is not None and (total.prec is None or total.prec > prev.prec)):
                self._tau[key] = total
            return self._tau[key]

    def tau(self, f):
        f = _as_function(self.alg, f)
        total = self.alg.zero(prec=f.prec)
        for k, c in sorted(f.nu_coefficients().items()):
            if 2 * k > self.N:
                continue
            t = self._tau_pure(c, self.N - 2 * k)
            total = total + (t.mul_nu(k) if k else t)
        return total

    def tau_via_D_inv(self, f):
        """Alternative route ``tau(f) = f - D^{-1}(1 (x) df)``."""
        f = _as_function(self.alg, f)
        return f - self.D_inv(exterior_d(f))

    def star(self, f, g):
        return self.alg.sigma_circ(self.tau(f), self.tau(g))

    def commutator_nu(self, f, g):
        """``(1/nu)(f*g - g*f)``."""
        d = self.star(f, g) - self.star(g, f)
        return d.div_nu(1)

    def function(self, f):
        return _as_function(self.alg, f)

    def certified_nu_order(self):
        return self.N // 2

    # ----------------------------------------------------------- derivations
    def derivation(self, A):
        """``h_A = D^{-1}(1 (x) A)`` for a closed one-form series ``A`` (central element)."""
        if isinstance(A, (list, tuple, dict)):
            A = one_form(self.alg, A)
        for (nu, alpha, forms), _ in A.terms.items():
            if any(alpha) or len(forms) != 1:
                raise SetupError("A must be a formal series of one-forms")
        if not exterior_d(A).is_zero():
            raise SetupError("A not closed")
        h = self.D_inv(A)
        return DerivationHandle(self, A, h)

    def __repr__(self):
        return f"<FedosovSetup {self.name or self.geom!r} N={self.N}>"


def _rebase(a, alg):
    return alg.element(dict(a.terms), a.prec)


@dataclass
class DerivationHandle:
    setup: FedosovSetup
    A: WeylElement
    h: WeylElement

    def apply(self, f):
        st = self.setup
        return sigma_project(-st.alg.ad_nu(self.h, st.tau(f)))

    __call__ = apply


# ---------------------------------------------------------------------------
# connection differences and equivalence
# ---------------------------------------------------------------------------

def _fiber_partial(a, i):
    acc = {}
    for (nu, alpha, forms), c in a.terms.items():
        e = alpha[i]
        if e:
            beta = alpha[:i] + (e - 1,) + alpha[i + 1 :]
            acc[(nu, beta, forms)] = c * e
    return a.alg._finish(acc, None if a.prec is None else a.prec - 1)


@dataclass
class ConnectionDifference:
    T: WeylElement
    sigma_element: WeylElement
    sigma3: list = field(repr=False)
    S: list = field(repr=False)


def connection_difference(geomA, geomB, alg=None):
    """``T^{nabla - nabla'}`` with ``nabla - nabla' = (1/nu) ad(T)`` and ``sigma (x) 1 = delta^{-1} T``."""
    if not geomA.same_omega(geomB):
        raise GeometryError("omega mismatch between the two geometries")
    n = geomA.dim
    alg = alg or geomA.algebra(4)
    S = [[[geomA.gamma[k][i][j] - geomB.gamma[k][i][j] for j in range(n)] for i in range(n)] for k in range(n)]
    w = geomA.omega
    acc = {}
    half = geomA.ring.coerce(1) / 2
    for a in range(n):
        for b in range(n):
            e = [0] * n
            e[a] += 1
            e[b] += 1
            e = tuple(e)
            for m in range(n):
                v = geomA.ring.zero
                for k in range(n):
                    if not w[k][a].is_zero() and not S[k][m][b].is_zero():
                        v = v + w[k][a] * S[k][m][b]
                if not v.is_zero():
                    key = (0, e, (m,))
                    acc[key] = acc[key] + v * half if key in acc else v * half
    T = alg._finish(acc, None)
    if not delta(T).is_zero():
        raise EngineConsistencyError("delta T != 0 for a connection difference")
    # curvatures must satisfy R = R' - nabla' T - (1/2nu)[T, T]
    link = curvature_element(geomA, alg) - curvature_element(geomB, alg) + nabla_operator(geomB, T)
    if not (link + alg.ad_nu(T, T) * Fraction(1, 2)).is_zero():
        raise EngineConsistencyError("curvatures of the two connections are not related through T")
    sig = delta_inv(T)
    sigma3 = [[[_third(sig, a, b, c) for c in range(n)] for b in range(n)] for a in range(n)]
    return ConnectionDifference(T, sig, sigma3, S)


def _third(a, i, j, k):
    v = _fiber_partial(_fiber_partial(_fiber_partial(a, i), j), k)
    return v.coefficient()


@dataclass
class Equivalence:
    equivalent: bool
    vartheta: WeylElement | None
    reason: str = ""

    def __bool__(self):
        return self.equivalent


def triple_equivalence(A, B):
    """Decide whether two setups on the same symplectic chart give the same Fedosov derivation."""
    if not A.geom.same_omega(B.geom):
        raise GeometryError("omega mismatch between the two setups")
    N = min(A.N, B.N)
    alg = A.geom.algebra(N)
    cd = connection_difference(A.geom, B.geom, alg)
    sA, sB = _rebase(A.s, alg), _rebase(B.s, alg)
    X = cd.sigma_element - sA + sB
    for (nu, alpha, forms), _ in X.terms.items():
        if sum(alpha) != 1:
            return Equivalence(False, None, "sigma - s + s' has terms of symmetric degree != 1")
    theta = alg._finish({(nu, (0,) * alg.dim, (alpha.index(1),)): c for (nu, alpha, _), c in X.terms.items()}, X.prec)
    dOm = _rebase(A.Omega, alg) - _rebase(B.Omega, alg) - exterior_d(theta)
    if not dOm.is_zero():
        return Equivalence(False, theta, "Omega - Omega' != d(vartheta)")
    # cross-check through r: T - r + r' = 1 (x) vartheta
    rA, rB = _rebase(A.r, alg), _rebase(B.r, alg)
    if not (cd.T - rA + rB - theta).is_zero():
        raise EngineConsistencyError("equivalence conditions hold but T - r + r' is not 1 (x) vartheta")
    return Equivalence(True, theta)


def normalize_triple(setup):
    """Equivalent setup with ``s'`` of minimal total degree 4 and no symmetric-degree-1 part."""
    s = setup.s
    alg = setup.alg
    geom = setup.geom
    n = geom.dim
    sig = s.homogeneous(degs=3, nu=0)
    theta_sym = -s.homogeneous(degs=1)
    if sig.is_zero() and theta_sym.is_zero():
        return setup
    s_new = s - sig + theta_sym
    theta = alg._finish(
        {(nu, (0,) * n, (alpha.index(1),)): c for (nu, alpha, _), c in theta_sym.terms.items()}, theta_sym.prec
    )
    Omega_new = setup.Omega - exterior_d(theta)
    inv = _omega_inverse(geom)
    new_gamma = [[[geom.gamma[k][i][j] for j in range(n)] for i in range(n)] for k in range(n)]
    if not sig.is_zero():
        sig3 = [[[_third(sig, a, b, c) for c in range(n)] for b in range(n)] for a in range(n)]
        for l in range(n):
            for a in range(n):
                for b in range(n):
                    v = geom.ring.zero
                    for c in range(n):
                        if not sig3[a][b][c].is_zero() and not inv[c][l].is_zero():
                            v = v + sig3[a][b][c] * inv[c][l]
                    new_gamma[l][a][b] = new_gamma[l][a][b] - v
    geom_new = geom.with_connection(new_gamma) if not sig.is_zero() else geom
    return FedosovSetup(geom_new, setup.N, Omega_new, _rebase(s_new, geom_new.algebra(setup.N)), name=setup.name)


def _omega_inverse(geom):
    n = geom.dim
    return [[-geom.lam[i][j] for j in range(n)] for i in range(n)]


# ---------------------------------------------------------------------------
# functional spellings
# ---------------------------------------------------------------------------

def solve_r(geom, order, Omega=None, s=None):
    return FedosovSetup(geom, order, Omega, s).r


def fedosov_D(setup, a):
    return setup.D(a)


def fedosov_D_inverse(setup, a):
    return setup.D_inv(a)


def taylor_series(setup, f):
    return setup.tau(f)


def star_product(setup, f, g):
    return setup.star(f, g)


def derivation_from_one_form(setup, A):
    return setup.derivation(A)


def _is_central(a):
    return is_central(a)


def omega_as_element(setup):
    return two_form(setup.alg, setup.geom.omega)


def form_series(a, degree):
    return form_components(a, degree)
