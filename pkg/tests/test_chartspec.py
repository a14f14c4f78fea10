from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from fedosov_lab.chartspec import ChartSpec, ChartSpecError, load_chart_spec, parse_chart_spec, parse_formal_function
from fedosov_lab.scalar import ExpressionError

SPECS = Path(__file__).resolve().parent.parent / "specs"

MINIMAL = """\
[chart]
coords = x, y
order = 6
omega[1,2] = 1
"""


def diagnostics(text):
    with pytest.raises(ChartSpecError) as info:
        parse_chart_spec(text)
    return info.value.diagnostics


def with_chart(extra, omega="1"):
    return MINIMAL.replace("omega[1,2] = 1", f"omega[1,2] = {omega}") + extra


def test_minimal_flat_spec():
    spec = parse_chart_spec(MINIMAL)
    assert spec.coords == ("x", "y")
    assert spec.order == 6
    assert spec.Omega == {} and spec.s_terms == {}
    geom = spec.geometry
    assert geom.omega[0][1] == geom.ring.one and geom.omega[1][0] == -geom.ring.one
    assert all(c.is_zero() for block in geom.gamma for row in block for c in row)
    assert not spec.has_action()


def test_broken_connection_names_identity():
    (d,) = load_diag("bad_connection.spec")
    assert d.kind == "validation"
    assert "not symplectic" in d.message and "nabla omega" in d.message
    assert d.line == 7


def load_diag(name):
    with pytest.raises(ChartSpecError) as info:
        load_chart_spec(SPECS / name)
    return info.value.diagnostics


def test_omega_at_order_zero_rejected():
    (d,) = diagnostics(with_chart("[omega2]\nOmega[0; 1,2] = 1\n"))
    assert d.kind == "validation" and "nu^1" in d.message
    assert d.line == 6


@pytest.mark.parametrize(
    "text, kind, fragment, line, col",
    [
        (with_chart("", omega="1/x"), "validation", "denominator vanishes", 4, 14),
        (with_chart("", omega="1.5"), "syntax", "floating point", 4, 14),
        (with_chart("", omega="x"), "validation", "[connection] section is required", 4, 14),
        (with_chart("", omega="((((x"), "syntax", "expected ')'", 4, 19),
        (MINIMAL.replace("x, y", "x, y, z"), "validation", "must be even", 2, 10),
        (MINIMAL.replace("x, y", "x, nu"), "syntax", "invalid coordinate", 2, 10),
        (MINIMAL.replace("x, y", "x, x"), "validation", "duplicate coordinate", 2, 10),
        (MINIMAL.replace("order = 6", "order = -1"), "syntax", "order must be", 3, 9),
        (with_chart("[s]\ns[0; 1] = 1\n"), "validation", "total degree at least 3", 6, 1),
        (with_chart("[lie_algebra]\nbasis = e1\nfield[e1] = x, 0\n"), "validation", "not symplectic", 5, 1),
        (with_chart("[foo]\n"), "unsupported", "unknown section", 5, 2),
        ("[chart\n", "syntax", "must end with ']'", 1, 1),
        ("", "validation", "missing [chart]", 1, 1),
    ],
)
def test_located_diagnostics(text, kind, fragment, line, col):
    diags = diagnostics(text)
    d = diags[0]
    assert (d.kind, d.line, d.col) == (kind, line, col)
    assert fragment in d.message
    assert str(d).startswith(f"line {line}, col {col}: {kind} error:")


def test_all_fixture_specs_load():
    good = sorted(p.name for p in SPECS.glob("*.spec") if p.name != "bad_connection.spec")
    for name in good:
        spec = load_chart_spec(SPECS / name)
        assert spec.name
        spec.setup(order=2)


def test_sphere_spec_matches_fixture(sphere):
    spec = load_chart_spec(SPECS / "sphere.spec")
    g = spec.geometry
    ring = g.ring
    for i in range(2):
        for j in range(2):
            assert str(g.omega[i][j]) == str(sphere.omega[i][j])
            for k in range(2):
                assert str(g.gamma[k][i][j]) == str(sphere.gamma[k][i][j])
    assert spec.J0[0] == (ring.gen(0) ** 2 + ring.gen(1) ** 2) / (2 * (1 + ring.gen(0) ** 2 + ring.gen(1) ** 2))


def test_sl2_action_block():
    spec = load_chart_spec(SPECS / "sl2.spec")
    action = spec.action()
    assert action.basis == ["e1", "e2", "e3"]
    assert action.c[2][0][0] == -2 and action.c[0][2][0] == 2


def test_bracket_must_be_linear():
    text = with_chart("[lie_algebra]\nbasis = e1, e2\nbracket[e1,e2] = e2^2\nfield[e1] = 1, 0\nfield[e2] = 0, 1\n")
    diags = diagnostics(text)
    assert diags[0].line == 7


def test_partial_j0_rejected():
    text = with_chart("[lie_algebra]\nbasis = e1, e2\nfield[e1] = 1, 0\nfield[e2] = 0, 1\nJ0[e1] = y\n")
    assert "every basis element or none" in diagnostics(text)[0].message


def test_formal_function_in_nu(ring):
    parts = parse_formal_function("x + nu*y^2 - 3*nu^2", ring)
    assert sorted(parts) == [0, 1, 2]
    assert parts[1] == ring.gen(1) ** 2
    with pytest.raises(ExpressionError):
        parse_formal_function("x/nu", ring)


def test_comments_and_blank_lines():
    text = "# leading comment\n\n" + MINIMAL.replace("order = 6", "order = 6  # truncation")
    assert parse_chart_spec(text).order == 6


TOKENS = ["[chart]", "[connection]", "[omega2]", "[s]", "[lie_algebra]", "[probes]", "coords", "order", "omega",
          "Gamma", "Omega", "basis", "bracket", "field", "J0", "f", "=", ",", ";", "[", "]", "(", ")", "^", "**",
          "-", "+", "*", "/", "x", "y", "nu", "e1", "1", "2", "0", "12345678901234567890", "#", "\n", " ", "1.5",
          "\x00", "é", "\t"]


def check_total(text):
    try:
        spec = parse_chart_spec(text)
    except ChartSpecError as e:
        assert e.diagnostics
        for d in e.diagnostics:
            assert d.line >= 1 and d.col >= 1
            assert d.kind in ("syntax", "validation", "unsupported")
    else:
        assert isinstance(spec, ChartSpec)


@settings(max_examples=200)
@given(st.lists(st.sampled_from(TOKENS), max_size=60))
def test_fuzz_token_soup(tokens):
    check_total("".join(tokens))


@settings(max_examples=200)
@given(st.sampled_from(sorted(p.name for p in SPECS.glob("*.spec"))), st.data())
def test_fuzz_mutated_fixtures(name, data):
    text = (SPECS / name).read_text()
    for _ in range(data.draw(st.integers(1, 4))):
        pos = data.draw(st.integers(0, len(text)))
        op = data.draw(st.sampled_from(["delete", "insert", "duplicate"]))
        if op == "delete":
            text = text[:pos] + text[pos + data.draw(st.integers(1, 8)):]
        elif op == "insert":
            text = text[:pos] + data.draw(st.sampled_from(TOKENS)) + text[pos:]
        else:
            line_start = text.rfind("\n", 0, pos) + 1
            line_end = text.find("\n", pos)
            line_end = len(text) if line_end < 0 else line_end
            text = text[:line_end] + "\n" + text[line_start:line_end] + text[line_end:]
    check_total(text)


@settings(max_examples=100)
@given(st.text(max_size=200))
def test_fuzz_arbitrary_text(text):
    check_total(text)


def test_deep_nesting_is_diagnosed():
    d = diagnostics(with_chart("", omega="(" * 5000 + "1"))[0]
    assert d.kind in ("syntax", "unsupported")


def test_huge_exponent_is_diagnosed():
    d = diagnostics(with_chart("", omega="(1 + x)^100000"))[0]
    assert d.line == 4
