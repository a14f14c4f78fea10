import itertools
import random

import pytest
import sympy
from hypothesis import given

from fedosov_lab import fixtures
from fedosov_lab.calculus import GeometryError, delta_inv, exterior_d, one_form, sigma_project
from fedosov_lab.fedosov import (
    FedosovSetup,
    SetupError,
    connection_difference,
    derivation_from_one_form,
    fedosov_D,
    fedosov_D_inverse,
    normalize_triple,
    solve_r,
    star_product,
    taylor_series,
    triple_equivalence,
)
from fedosov_lab.sampling import random_polynomial
from fedosov_lab.weyl import degree_of

from conftest import element, poly, seeds
from oracles import NU, X, Y, flat_taylor, moyal, series_through, to_sympy


def monomials(ring, max_degree):
    x, y = ring.gens()
    return [x**a * y**b for a in range(max_degree + 1) for b in range(max_degree + 1 - a)]


def nonflat_connection(geom):
    """Flat omega with a symplectic connection built from a totally symmetric tensor."""
    r = geom.ring
    x, y = r.gens()
    sym = {(0, 0, 1): y * y, (0, 1, 1): x, (0, 0, 0): x * y}
    winv = [[r.zero, -r.one], [r.one, r.zero]]

    def S(i, j, k):
        return sym.get(tuple(sorted((i, j, k))), r.zero)

    G = [[[sum((winv[l][i] * S(i, j, k) for i in range(2)), r.zero) for k in range(2)] for j in range(2)] for l in range(2)]
    return geom.with_connection(G, name="flat omega, curved nabla")


# -- r ------------------------------------------------------------------------

def test_flat_r_vanishes(flat_setup):
    assert flat_setup.r.is_zero()
    assert solve_r(fixtures.flat_plane(), 6).is_zero()


def test_flat_omega_r_leading_part(flat_omega_setup):
    st = flat_omega_setup
    w = st.alg.element({k: c for k, c in st.Omega.terms.items()})
    lead = st.r.homogeneous(nu=1, degs=1)
    assert lead.agrees(delta_inv(w))
    assert min(degree_of(st.r, "Deg")) == 3
    eq, s_eq = st.r_residual()
    assert eq.is_zero() and s_eq.is_zero()


def test_sphere_r_starts_at_degree_three(sphere_setup):
    st = sphere_setup
    assert not st.r.is_zero()
    assert min(degree_of(st.r, "Deg")) == 3
    assert st.r.homogeneous(degs=3, nu=0).agrees(delta_inv(st.R))
    eq, s_eq = st.r_residual()
    assert eq.is_zero() and s_eq.is_zero()
    assert degree_of(st.r, "dega") == {1}


@pytest.mark.parametrize("which", ["flat_omega_setup", "sphere_setup"])
def test_r_unique_from_perturbed_start(request, which):
    st = request.getfixturevalue(which)
    bump = element(st.alg, 5, dega=1, max_nu=1) + st.alg.term(st.geom.ring.gen(0), fiber=(2, 0), forms=(1,))
    again = st.solve_r_from(st.r + bump)
    assert (again - st.r).is_zero()


def test_setup_validation(flat, ring):
    x, y = ring.gens()
    with pytest.raises(SetupError, match="nu\\^1"):
        FedosovSetup(flat, 4, {0: [[0, 1], [-1, 0]]})
    with pytest.raises(SetupError, match="not closed"):
        R4 = fixtures.flat_space(2)
        q1 = R4.ring.gen(0)
        m = [[R4.ring.zero] * 4 for _ in range(4)]
        m[1][2], m[2][1] = q1, -q1
        FedosovSetup(R4, 4, {1: m})
    A = flat.algebra(4)
    with pytest.raises(SetupError, match="sigma"):
        FedosovSetup(flat, 4, s=A.function({2: x}))
    with pytest.raises(SetupError, match="total degree"):
        FedosovSetup(flat, 4, s=A.term(1, fiber=(1, 0)))


# -- D, D^-1, tau ---------------------------------------------------------------

SETUPS = ["flat_setup", "flat_omega_setup", "sphere_setup"]


def test_D_of_one(flat_omega_setup, sphere_setup):
    for st in (flat_omega_setup, sphere_setup):
        assert fedosov_D(st, st.alg.one).is_zero()
        assert fedosov_D_inverse(st, st.alg.zero()).is_zero()


@pytest.mark.parametrize("which", SETUPS)
@given(seed=seeds())
def test_D_squares_to_zero(request, which, seed):
    st = request.getfixturevalue(which)
    a = element(st.alg, seed, rational=not st.geom.is_flat())
    assert st.D(st.D(a)).is_zero()


@pytest.mark.parametrize("which", SETUPS)
@given(seeds(), seeds())
def test_D_super_leibniz(request, which, a, b):
    st = request.getfixturevalue(which)
    P = element(st.alg, a, terms=3, dega=a % 2)
    Q = element(st.alg, b, terms=3)
    circ = st.alg.circ
    sign = -1 if a % 2 else 1
    assert (st.D(circ(P, Q)) - circ(st.D(P), Q) - circ(P, st.D(Q)) * sign).is_zero()


@pytest.mark.parametrize("which", SETUPS)
@given(seed=seeds())
def test_D_homotopy(request, which, seed):
    st = request.getfixturevalue(which)
    a = element(st.alg, seed, dega=1 + seed % 2)
    assert (st.D(st.D_inv(a)) + st.D_inv(st.D(a)) - a).is_zero()
    assert sigma_project(st.D_inv(a)).is_zero()
    assert all(sum(k[1]) >= 1 for k in st.D_inv(a).terms)


def test_flat_tau_examples(flat_setup, ring):
    st = flat_setup
    x, y = ring.gens()
    assert taylor_series(st, x).agrees(st.alg.function(x) + st.alg.y(0))
    assert taylor_series(st, ring.one).agrees(st.alg.one)
    for seed in range(10):
        f = poly(ring, seed, 4)
        assert (taylor_series(st, f) - flat_taylor(st.alg, f, st.N)).is_zero()


@pytest.mark.parametrize("which", SETUPS)
@given(seed=seeds())
def test_tau_is_flat_section(request, which, seed):
    st = request.getfixturevalue(which)
    rng = random.Random(seed)
    f = st.function({0: random_polynomial(st.geom.ring, rng, 3), 1: random_polynomial(st.geom.ring, rng, 1)})
    t = st.tau(f)
    assert (sigma_project(t) - f).is_zero()
    assert st.D(t).is_zero()
    assert (t - st.tau_via_D_inv(f)).is_zero()


def test_tau_cache_is_thread_safe(sphere_setup, ring):
    from concurrent.futures import ThreadPoolExecutor

    fs = [poly(ring, s, 3) for s in range(8)] * 3
    with ThreadPoolExecutor(4) as pool:
        out = list(pool.map(sphere_setup.tau, fs))
    for f, t in zip(fs, out):
        assert (t - sphere_setup.tau(f)).is_zero()


# -- star products --------------------------------------------------------------

def test_moyal_examples(ring):
    st = fixtures.flat_setup(8)
    x, y = ring.gens()
    assert str(star_product(st, x, y)) == "x*y + (1/2)ν"
    assert str(star_product(st, y, x)) == "x*y - (1/2)ν"
    assert str(star_product(st, x * x, y * y)) == "x^2*y^2 + 2*x*y*ν + (1/2)ν^2"
    f = poly(ring, 3, 3)
    assert star_product(st, f, 1).agrees(st.function(f)) and star_product(st, 1, f).agrees(st.function(f))


def test_moyal_oracle(ring):
    st = fixtures.flat_setup(6)
    mons = monomials(ring, 3)
    for f, g in itertools.product(mons, repeat=2):
        got = to_sympy(star_product(st, f, g))
        assert sympy.expand(got - moyal(to_sympy(f), to_sympy(g), 3)) == 0


def test_flat_omega_is_rescaled_moyal(flat_omega_setup, ring):
    # Omega = nu omega rescales the Poisson tensor by 1/(1 + nu)
    st = flat_omega_setup
    order = st.N // 2
    for f, g in itertools.product(monomials(ring, 2), repeat=2):
        got = to_sympy(st.star(f, g))
        want = series_through(moyal(to_sympy(f), to_sympy(g), order, hbar=NU / (1 + NU)), order)
        assert sympy.expand(got - want) == 0


@pytest.mark.parametrize("which", SETUPS)
@given(seeds(), seeds(), seeds())
def test_associativity(request, which, a, b, c):
    st = request.getfixturevalue(which)
    f, g, h = (poly(st.geom.ring, s, 2) for s in (a, b, c))
    assert (st.star(st.star(f, g), h) - st.star(f, st.star(g, h))).is_zero()


@pytest.mark.parametrize("which", SETUPS)
@given(seeds(), seeds())
def test_correspondence_principle(request, which, a, b):
    st = request.getfixturevalue(which)
    f, g = poly(st.geom.ring, a), poly(st.geom.ring, b)
    p = st.star(f, g)
    assert p.homogeneous(nu=0).agrees(st.function(f * g))
    c = p - st.star(g, f)
    assert c.homogeneous(nu=0).is_zero()
    assert c.homogeneous(nu=1).agrees(st.function({1: st.geom.poisson(f, g)}))


def test_star_certified_order(sphere_setup, ring):
    p = sphere_setup.star(ring.gen(0), ring.gen(1))
    assert p.certified_nu_order() == sphere_setup.N // 2


# -- derivations ----------------------------------------------------------------

def closed_forms(ring):
    x, y = ring.gens()
    return [
        [ring.zero, ring.one],
        [2 * x * y, x * x],
        {1: [y, x]},
        [3 * x * x, ring.zero],
        {0: [ring.one, ring.zero], 2: [ring.zero, y]},
    ]


def test_derivation_of_dy_is_quasi_inner(flat_setup, ring):
    st = flat_setup
    x, y = ring.gens()
    D = derivation_from_one_form(st, [ring.zero, ring.one])
    assert D(x).agrees(st.commutator_nu(y, x))
    for seed in range(5):
        f = poly(ring, seed)
        assert (D(f) - st.commutator_nu(y, f)).is_zero()


def test_zero_form_gives_zero_derivation(flat_setup, ring):
    D = flat_setup.derivation([ring.zero, ring.zero])
    assert D(ring.gen(0) ** 3).is_zero()


def test_non_closed_form_rejected(flat_setup, ring):
    with pytest.raises(SetupError, match="not closed"):
        flat_setup.derivation([ring.gen(1), ring.zero])


@pytest.mark.parametrize("which", SETUPS)
def test_derivations_are_leibniz(request, which, ring):
    st = request.getfixturevalue(which)
    rng = random.Random(1)
    for A in closed_forms(ring)[:3]:
        D = st.derivation(A)
        assert (st.D(D.h) - D.A).is_zero()
        assert sigma_project(D.h).is_zero()
        for _ in range(3):
            f, g = random_polynomial(ring, rng, 2), random_polynomial(ring, rng, 2)
            lhs = D(st.star(f, g))
            rhs = st.star(D(f), g) + st.star(f, D(g))
            assert (lhs - rhs).is_zero()


def test_exact_forms_are_quasi_inner(sphere_setup, ring):
    st = sphere_setup
    x, y = ring.gens()
    for f in (x * y, x * x - y, x / (1 + y * y)):
        D = st.derivation([f.partial(0), f.partial(1)])
        for g in (x, y, x * y):
            assert (D(g) - st.commutator_nu(f, g)).is_zero()


def test_distinct_forms_give_distinct_derivations(flat_setup, ring):
    x, y = ring.gens()
    outs = []
    for A in closed_forms(ring):
        D = flat_setup.derivation(A)
        outs.append(tuple(str(D(g)) for g in (x, y, x * y)))
    assert len(set(outs)) == len(outs)


# -- connection differences and equivalence --------------------------------------

def test_connection_difference_identical(flat):
    cd = connection_difference(flat, flat)
    assert cd.T.is_zero()


def test_connection_difference_oracle(flat):
    other = nonflat_connection(flat)
    alg = flat.algebra(5)
    cd = connection_difference(flat, other, alg)
    from fedosov_lab.calculus import delta, nabla_operator

    assert delta(cd.T).is_zero()
    for seed in range(15):
        a = element(alg, seed)
        assert (nabla_operator(flat, a) - nabla_operator(other, a) - alg.ad_nu(cd.T, a)).is_zero()
    s3 = cd.sigma3
    for i, j, k in itertools.product(range(2), repeat=3):
        assert s3[i][j][k] == s3[j][k][i] == s3[k][j][i]


def test_connection_difference_needs_same_omega(flat, sphere):
    with pytest.raises(GeometryError):
        connection_difference(flat, sphere)


def test_identical_setups_equivalent(flat_omega_setup):
    eq = triple_equivalence(flat_omega_setup, flat_omega_setup)
    assert eq.equivalent and eq.vartheta.is_zero()


def unnormalized(ring, order=6):
    x, y = ring.gens()
    g = fixtures.flat_plane(ring)
    A = g.algebra(order)
    s = A.term(x, fiber=(3, 0)) + A.term(y, nu=1, fiber=(0, 1)) + A.term(1, nu=1, fiber=(2, 1))
    return FedosovSetup(g, order, fixtures.omega_series(g), s)


def test_normalize_examples(ring, flat_omega_setup):
    assert normalize_triple(flat_omega_setup) is flat_omega_setup
    st = unnormalized(ring)
    new = normalize_triple(st)
    assert all(sum(k[1]) != 1 for k in new.s.terms)
    assert min(degree_of(new.s, "Deg")) >= 4
    eq = triple_equivalence(st, new)
    assert eq.equivalent
    assert eq.vartheta.agrees(st.alg.term(-ring.gen(1), nu=1, forms=(1,)))


def test_degree_one_s_goes_into_vartheta(ring):
    g = fixtures.flat_plane(ring)
    A = g.algebra(6)
    st = FedosovSetup(g, 6, s=A.term(1, nu=1, fiber=(1, 0)))
    new = normalize_triple(st)
    assert new.s.is_zero()
    assert new.geom is g
    assert (new.Omega - (st.Omega - exterior_d(A.term(-1, nu=1, forms=(0,))))).is_zero()
    assert triple_equivalence(st, new).equivalent


def test_normalized_star_products_agree(ring):
    st = unnormalized(ring)
    new = normalize_triple(st)
    x, y = ring.gens()
    assert st.star(x, y).agrees(new.star(x, y))
    for seed in range(6):
        f, g = poly(ring, seed, 2), poly(ring, seed + 100, 2)
        assert (st.star(f, g) - new.star(f, g)).is_zero()


def test_inconsistent_s_is_not_equivalent(ring, flat_omega_setup):
    g = flat_omega_setup.geom
    A = g.algebra(6)
    other = FedosovSetup(g, 6, {1: [[0, 2], [-2, 0]]})
    eq = triple_equivalence(flat_omega_setup, other)
    assert not eq.equivalent and "d(vartheta)" in eq.reason
    other = FedosovSetup(g, 6, fixtures.omega_series(g), A.term(1, nu=1, fiber=(2, 0)))
    assert not triple_equivalence(flat_omega_setup, other).equivalent


def test_exact_omega_shift_is_equivalent(ring, flat_omega_setup):
    # Omega' = Omega - d(vartheta) with s' = s + vartheta (x) 1
    g = flat_omega_setup.geom
    A = g.algebra(6)
    x, y = ring.gens()
    theta = A.term(x * y, nu=1, forms=(1,))
    Om = flat_omega_setup.Omega - exterior_d(theta)
    s = A.term(x * y, nu=1, fiber=(0, 1))
    other = FedosovSetup(g, 6, Om, s)
    eq = triple_equivalence(flat_omega_setup, other)
    assert eq.equivalent and eq.vartheta.agrees(theta)
    assert flat_omega_setup.star(x, y).agrees(other.star(x, y))


def test_equivalence_with_connection_shift(ring, flat):
    other = nonflat_connection(flat)
    st = FedosovSetup(flat, 5)
    alt = FedosovSetup(other, 5, s=-connection_difference(st.geom, other, st.alg).sigma_element)
    eq = triple_equivalence(st, alt)
    assert eq.equivalent, eq.reason
    x, y = ring.gens()
    for f, g in [(x, y), (x * x, y), (x * y, y * y)]:
        assert (st.star(f, g) - alt.star(f, g)).is_zero()
