import pytest
from hypothesis import given

from fedosov_lab import fixtures
from fedosov_lab.calculus import (
    ChartGeometry,
    GeometryError,
    VectorField,
    check_symplectic,
    curvature_element,
    delta,
    delta_inv,
    exterior_d,
    insert_field,
    lie_derivative,
    nabla_operator,
    sigma_project,
    sym_cov_derivative,
    symmetric_one_form,
    two_form,
)
from fedosov_lab.weyl import degree_of

from conftest import element, seeds

GEOMETRIES = ["flat", "sphere", "flat4"]


@pytest.fixture(scope="module")
def geoms():
    return {"flat": fixtures.flat_plane(), "sphere": fixtures.sphere_chart(), "flat4": fixtures.flat_space(2)}


def setup_for(geoms, name):
    g = geoms[name]
    return g, g.algebra(5 if name != "flat4" else 4)


def sample(alg, geom, seed, **kw):
    return element(alg, seed, rational=not geom.is_flat(), **kw)


def test_delta_examples(flat, ring):
    A = flat.algebra(6)
    assert str(delta(A.term(1, fiber=(1, 1)))) == "y2 ⊗ dx1 + y1 ⊗ dx2"
    assert delta(A.function(ring.gen(0) ** 3)).is_zero()


def test_delta_inv_examples(flat, ring):
    A = flat.algebra(6)
    assert delta_inv(A.term(1, fiber=(1, 0), forms=(1,))) == A.term(ring.const(1) / 2, fiber=(1, 1))
    assert delta_inv(A.function(ring.gen(1))).is_zero()


def test_sigma_examples(flat, ring):
    A = flat.algebra(6)
    x, y = ring.gens()
    f = x * y + 1
    assert sigma_project(A.function(f) + A.y(0) + A.dx(1)) == A.function(f)
    assert sigma_project(A.function({1: y})) == A.function({1: y})


def test_insertion_examples(flat, ring):
    A = flat.algebra(6)
    d1 = VectorField([ring.one, ring.zero])
    assert insert_field("symmetric", d1, A.term(1, fiber=(2, 0))) == A.y(0) * 2
    assert insert_field("antisymmetric", d1, A.term(1, forms=(0, 1))) == A.dx(1)
    X = VectorField([ring.gen(1), ring.gen(0) + 2])
    for seed in range(10):
        a = element(A, seed)
        assert insert_field("antisymmetric", X, insert_field("antisymmetric", X, a)).is_zero()


def test_flat_nabla_is_exterior_derivative(flat, ring):
    A = flat.algebra(6)
    x, y = ring.gens()
    f = x * x * y
    got = nabla_operator(flat, A.term(f, fiber=(1, 0)))
    assert got == A.term(f.partial(0), fiber=(1, 0), forms=(0,)) + A.term(f.partial(1), fiber=(1, 0), forms=(1,))


def test_curvature_shapes(flat, sphere):
    assert curvature_element(flat, flat.algebra(4)).is_zero()
    R = curvature_element(sphere, sphere.algebra(4))
    assert not R.is_zero()
    assert degree_of(R, "degs") == {2} and degree_of(R, "dega") == {2} and degree_of(R, "degnu") == {0}


def test_sphere_curvature_matches_gaussian_curvature(sphere, ring):
    # metric q^-2 (dx^2 + dy^2) has Gaussian curvature K = 4, so
    # omega_it R^t_j12 = -K q^-4 delta_ij and R = -(K/2) q^-4 (y1^2 + y2^2) dx1^dx2
    x, y = ring.gens()
    q = 1 + x * x + y * y
    A = sphere.algebra(4)
    c = -2 * q**-4
    expect = A.term(c, fiber=(2, 0), forms=(0, 1)) + A.term(c, fiber=(0, 2), forms=(0, 1))
    assert curvature_element(sphere, A) == expect


def test_lie_derivative_examples(flat, ring):
    A = flat.algebra(6)
    x, y = ring.gens()
    X = fixtures.rotation_field(ring)
    f = x**3 + x * y
    assert lie_derivative(X, A.function(f)) == A.function(X[0] * f.partial(0) + X[1] * f.partial(1))
    assert lie_derivative(X, two_form(A, flat.omega)).is_zero()


def test_sym_cov_derivative_examples(flat, ring):
    A = flat.algebra(6)
    x, y = ring.gens()
    D = sym_cov_derivative(flat, symmetric_one_form(A, [ring.zero, x]))
    assert D == A.term(1, fiber=(1, 1))
    # Hessian oracle: D(df) = H_ij y^i y^j
    f = 3 * x * x + x * y - 2 * y * y
    D = sym_cov_derivative(flat, symmetric_one_form(A, [f.partial(0), f.partial(1)]))
    H = [[f.partial(i).partial(j) for j in range(2)] for i in range(2)]
    expect = A.term(H[0][0], fiber=(2, 0)) + A.term(H[0][1] * 2, fiber=(1, 1)) + A.term(H[1][1], fiber=(0, 2))
    assert D == expect


@pytest.mark.parametrize("name", GEOMETRIES)
def test_sym_cov_derivative_has_symmetric_degree_two(geoms, name):
    g, A = setup_for(geoms, name)
    theta = symmetric_one_form(A, [g.ring.gen(1), g.ring.gen(0) ** 2] + [g.ring.zero] * (g.dim - 2))
    D = sym_cov_derivative(g, theta)
    assert degree_of(D, "degs") == {2}


def test_check_symplectic_examples(flat, ring):
    x, _ = ring.gens()
    c = check_symplectic(flat, VectorField([ring.one, ring.zero]))
    assert c.is_symplectic and c.theta == (ring.zero, ring.one)
    c = check_symplectic(flat, VectorField([x, ring.zero]))
    assert not c.is_symplectic
    assert c.lie_omega == two_form(flat.algebra(2), flat.omega)
    c = check_symplectic(flat, fixtures.cubic_field(ring))
    # theta_j = X^i omega_ij gives -3x^2 dx = -d(x^3); closed either way
    assert c.is_symplectic and c.theta == (-3 * x * x, ring.zero)
    A = flat.algebra(2)
    th = A.term(c.theta[0], forms=(0,))
    assert exterior_d(th).is_zero()
    assert th == exterior_d(A.function(-(x**3)))


@pytest.mark.parametrize("name", GEOMETRIES)
@given(seed=seeds())
def test_delta_identities(geoms, name, seed):
    g, A = setup_for(geoms, name)
    a = sample(A, g, seed)
    assert delta(delta(a)).is_zero()
    assert delta_inv(delta_inv(a)).is_zero()
    assert (delta(delta_inv(a)) + delta_inv(delta(a)) + sigma_project(a) - a).is_zero()


@pytest.mark.parametrize("name", GEOMETRIES)
@given(seed=seeds())
def test_nabla_identities(geoms, name, seed):
    g, A = setup_for(geoms, name)
    a = sample(A, g, seed)
    R = curvature_element(g, A)
    assert (delta(nabla_operator(g, a)) + nabla_operator(g, delta(a))).is_zero()
    assert (nabla_operator(g, nabla_operator(g, a)) + A.ad_nu(R, a)).is_zero()


@pytest.mark.parametrize("name", GEOMETRIES)
def test_bianchi(geoms, name):
    g, A = setup_for(geoms, name)
    R = curvature_element(g, A)
    assert delta(R).is_zero() and nabla_operator(g, R).is_zero()


def fields_for(g):
    r = g.ring
    if g.dim == 4:
        return [g.hamiltonian_field(r.gen(0) * r.gen(3) + r.gen(1) ** 2)]
    return [fixtures.rotation_field(r), fixtures.cubic_field(r), VectorField([r.one, r.zero])] if g.is_flat() else [
        fixtures.rotation_field(r)
    ]


@pytest.mark.parametrize("name", GEOMETRIES)
@given(seeds(), seeds())
def test_lie_derivative_is_a_derivation(geoms, name, a, b):
    g, A = setup_for(geoms, name)
    P, Q = sample(A, g, a, terms=3), sample(A, g, b, terms=3)
    for X in fields_for(g):
        lhs = lie_derivative(X, A.circ(P, Q))
        rhs = A.circ(lie_derivative(X, P), Q) + A.circ(P, lie_derivative(X, Q))
        assert (lhs - rhs).is_zero()


@pytest.mark.parametrize("name", GEOMETRIES)
@given(seed=seeds())
def test_lie_derivative_commutes_with_delta(geoms, name, seed):
    g, A = setup_for(geoms, name)
    a = sample(A, g, seed)
    for X in fields_for(g):
        assert (delta(lie_derivative(X, a)) - lie_derivative(X, delta(a))).is_zero()
        assert (delta_inv(lie_derivative(X, a)) - lie_derivative(X, delta_inv(a))).is_zero()


def test_rejects_non_closed_omega():
    R4 = fixtures.flat_space(2).ring
    p1 = R4.gen(2)
    w = [[R4.zero] * 4 for _ in range(4)]
    w[0][2], w[1][3] = R4.one, R4.one
    w[0][1] = 1 + p1  # d(omega) picks up dp1 ^ dq1 ^ dq2
    for i in range(4):
        for j in range(i):
            w[i][j] = -w[j][i]
    with pytest.raises(GeometryError, match="not closed"):
        ChartGeometry(R4, w)


def test_rejects_torsion(ring):
    x, _ = ring.gens()
    G = [[[ring.zero] * 2 for _ in range(2)] for _ in range(2)]
    G[0][0][1] = x
    with pytest.raises(GeometryError, match="torsion"):
        ChartGeometry(ring, [[0, 1], [-1, 0]], G)


def test_rejects_non_symplectic_connection(ring):
    x, _ = ring.gens()
    G = [[[ring.zero] * 2 for _ in range(2)] for _ in range(2)]
    G[0][0][0] = x
    with pytest.raises(GeometryError, match="not symplectic"):
        ChartGeometry(ring, [[0, 1], [-1, 0]], G)


def test_rejects_bad_omega(ring):
    with pytest.raises(GeometryError, match="antisymmetric"):
        ChartGeometry(ring, [[0, 1], [1, 0]])
    with pytest.raises(GeometryError):
        ChartGeometry(ring, [[0, 0], [0, 0]])
    with pytest.raises(GeometryError, match="not symplectic"):
        ChartGeometry(ring, [[0, 1 + ring.gen(0)], [-1 - ring.gen(0), 0]])


def test_poisson_convention(flat, ring):
    x, y = ring.gens()
    assert flat.poisson(x, y) == ring.one
    X = flat.hamiltonian_field((x * x + y * y) / 2)
    assert X == fixtures.rotation_field(ring)
