"""Standard geometries, setups and Lie algebra actions used by tests and the CLI."""

from __future__ import annotations

from .calculus import ChartGeometry, VectorField
from .fedosov import FedosovSetup
from .invariance import LieAction
from .scalar import CoordinateRing


def plane_ring():
    return CoordinateRing(["x", "y"])


def flat_plane(ring=None):
    ring = ring or plane_ring()
    return ChartGeometry(ring, [[0, 1], [-1, 0]], name="flat R^2")


def flat_space(m):
    """Flat R^{2m} with Darboux form sum dq^i ^ dp^i, coordinates q1..qm, p1..pm."""
    names = [f"q{i + 1}" for i in range(m)] + [f"p{i + 1}" for i in range(m)]
    ring = CoordinateRing(names)
    n = 2 * m
    w = [[0] * n for _ in range(n)]
    for i in range(m):
        w[i][m + i] = 1
        w[m + i][i] = -1
    return ChartGeometry(ring, w, name=f"flat R^{n}")


def sphere_chart(ring=None):
    """Stereographic chart of S^2: omega = q^-2 dx ^ dy with q = 1 + x^2 + y^2 and its Levi-Civita connection."""
    ring = ring or plane_ring()
    x, y = ring.gens()
    q = 1 + x * x + y * y
    G = [[[ring.zero] * 2 for _ in range(2)] for _ in range(2)]
    G[0][0][0] = -2 * x / q
    G[0][0][1] = G[0][1][0] = -2 * y / q
    G[0][1][1] = 2 * x / q
    G[1][1][1] = -2 * y / q
    G[1][0][1] = G[1][1][0] = -2 * x / q
    G[1][0][0] = 2 * y / q
    w = q ** -2
    return ChartGeometry(ring, [[0, w], [-w, 0]], G, name="S^2 stereographic")


def omega_series(geom, power=1, scale=1):
    """``{power: scale * omega}`` as Omega data."""
    n = geom.dim
    return {power: [[geom.omega[i][j] * scale for j in range(n)] for i in range(n)]}


def flat_setup(order=6, omega_multiple=False):
    g = flat_plane()
    return FedosovSetup(g, order, omega_series(g) if omega_multiple else None)


def sphere_setup(order=4):
    return FedosovSetup(sphere_chart(), order)


def rotation_field(ring):
    """``y d_x - x d_y``; Hamiltonian function (x^2 + y^2)/2 for omega = dx ^ dy."""
    x, y = ring.gens()
    return VectorField([y, -x])


def rotation_action(geom):
    return LieAction(geom, ["e1"], {}, [rotation_field(geom.ring)])


def translation_action(geom):
    """``e1 -> d_x`` (J0 = y), ``e2 -> d_y`` (J0 = -x), abelian."""
    r = geom.ring
    return LieAction(geom, ["e1", "e2"], {}, [[r.one, r.zero], [r.zero, r.one]])


def cubic_field(ring):
    """``3x^2 d_y``: symplectic, not affine for the flat connection."""
    x, _ = ring.gens()
    return VectorField([ring.zero, 3 * x * x])


def cubic_action(geom):
    return LieAction(geom, ["e1"], {}, [cubic_field(geom.ring)])


def sl2_action(geom):
    """Hamiltonians x^2/2, y^2/2, xy with [e1,e2] = e3, [e3,e1] = -2 e1, [e3,e2] = 2 e2."""
    r = geom.ring
    hs = [r.gen(0) ** 2 / 2, r.gen(1) ** 2 / 2, r.gen(0) * r.gen(1)]
    fields = [geom.hamiltonian_field(h) for h in hs]
    br = {(0, 1): {2: 1}, (1, 0): {2: -1}, (2, 0): {0: -2}, (0, 2): {0: 2}, (2, 1): {1: 2}, (1, 2): {1: -2}}
    return LieAction(geom, ["e1", "e2", "e3"], br, fields)


def affine_2d_action(geom):
    """``[e1, e2] = e2`` with X_e1 = x d_x - y d_y (J0 = xy), X_e2 = d_x (J0 = y)."""
    r = geom.ring
    x, y = r.gens()
    return LieAction(geom, ["e1", "e2"], {(0, 1): {1: 1}, (1, 0): {1: -1}}, [[x, -y], [r.one, r.zero]])


def sphere_rotation_action(geom):
    return LieAction(geom, ["e1"], {}, [rotation_field(geom.ring)])
