"""Parser for chart-spec files (INI-like sections with exact expressions).

See ``docs/chart-spec.md`` for the grammar. Parsing is total: any input either
yields a validated :class:`ChartSpec` or raises :class:`ChartSpecError` with
a list of located diagnostics.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from fractions import Fraction

from .calculus import ChartGeometry, GeometryError, VectorField
from .fedosov import FedosovSetup, SetupError
from .invariance import ActionError, LieAction
from .scalar import CoordinateRing, ExpressionError, PoleError, RationalFunction, ScalarError, parse_expression

__all__ = ["Diagnostic", "ChartSpecError", "ChartSpec", "parse_chart_spec", "parse_formal_function", "load_chart_spec"]

SECTIONS = ("chart", "connection", "omega2", "s", "lie_algebra", "probes")
RESERVED = {"nu"}
_NAME = re.compile(r"[A-Za-z_][A-Za-z_0-9]*$")
_INDEXED = re.compile(r"^([A-Za-z_][A-Za-z_0-9]*)\s*\[([^\]]*)\]$")


@dataclass(frozen=True)
class Diagnostic:
    line: int
    col: int
    kind: str  # syntax | validation | unsupported
    message: str

    def __str__(self):
        return f"line {self.line}, col {self.col}: {self.kind} error: {self.message}"


class ChartSpecError(ValueError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


@dataclass
class _Entry:
    key: str
    value: str
    line: int
    key_col: int
    value_col: int


@dataclass
class ChartSpec:
    name: str
    coords: tuple
    order: int
    geometry: ChartGeometry
    Omega: dict
    s_terms: dict
    lie_basis: list = field(default_factory=list)
    lie_brackets: dict = field(default_factory=dict)
    lie_fields: list = field(default_factory=list)
    J0: list | None = None
    probe_texts: list = field(default_factory=list)
    probes: list = field(default_factory=list)
    source: str = ""

    @property
    def ring(self):
        return self.geometry.ring

    def setup(self, order=None):
        N = self.order if order is None else order
        alg = self.geometry.algebra(N)
        s = alg.element(self.s_terms) if self.s_terms else None
        return FedosovSetup(self.geometry, N, self.Omega or None, s, name=self.name)

    def action(self):
        if not self.lie_basis:
            return None
        return LieAction(self.geometry, self.lie_basis, self.lie_brackets, self.lie_fields)

    def has_action(self):
        return bool(self.lie_basis)


def _split_lines(text):
    sections = {}
    order = []
    current = None
    diags = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        stripped = line.strip()
        if not stripped:
            continue
        lead = len(line) - len(line.lstrip())
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                diags.append(Diagnostic(lineno, lead + 1, "syntax", "section header must end with ']'"))
                current = None
                continue
            name = stripped[1:-1].strip()
            if name not in SECTIONS:
                diags.append(Diagnostic(lineno, lead + 2, "unsupported", f"unknown section [{name}]"))
                current = None
                continue
            if name in sections:
                diags.append(Diagnostic(lineno, lead + 1, "syntax", f"duplicate section [{name}]"))
                current = None
                continue
            sections[name] = (lineno, [])
            order.append(name)
            current = name
            continue
        if "=" not in line:
            diags.append(Diagnostic(lineno, lead + 1, "syntax", "expected 'key = value'"))
            continue
        if current is None:
            if not any(d.line == lineno for d in diags):
                diags.append(Diagnostic(lineno, lead + 1, "syntax", "entry outside of a known section"))
            continue
        eq = line.index("=")
        key = line[:eq].strip()
        value = line[eq + 1 :]
        vlead = len(value) - len(value.lstrip())
        if not key:
            diags.append(Diagnostic(lineno, lead + 1, "syntax", "missing key before '='"))
            continue
        sections[current][1].append(_Entry(key, value.strip(), lineno, lead + 1, eq + 2 + vlead))
    return sections, diags


class _Builder:
    def __init__(self, text):
        self.text = text
        self.diags = []

    def err(self, entry_or_line, kind, message, col=None):
        if isinstance(entry_or_line, _Entry):
            line = entry_or_line.line
            col = entry_or_line.key_col if col is None else col
        else:
            line = entry_or_line
            col = 1 if col is None else col
        self.diags.append(Diagnostic(line, col, kind, message))

    def expr(self, entry, ring, extra=None, text=None, offset=None):
        text = entry.value if text is None else text
        base = entry.value_col if offset is None else offset
        try:
            v = parse_expression(text, ring, extra)
        except ExpressionError as e:
            self.err(entry, "syntax", e.message, base + (e.col or 1) - 1)
            return None
        except ScalarError as e:
            self.err(entry, "syntax", str(e), base)
            return None
        try:
            v.evaluate([0] * ring.dim)
        except PoleError:
            self.err(entry, "validation", "denominator vanishes at the origin (chart must be star-shaped around 0)", base)
            return None
        return v

    def indices(self, entry, text, count, dim, allow_nu=False):
        """Parse ``"p; i,j"`` style index lists; returns (nu_power, [indices]) or None."""
        nu = None
        body = text
        if allow_nu:
            if ";" not in text:
                self.err(entry, "syntax", "expected '[nu_power; indices]'")
                return None
            head, body = text.split(";", 1)
            try:
                nu = int(head.strip())
            except ValueError:
                self.err(entry, "syntax", "nu power must be a non-negative integer")
                return None
            if nu < 0:
                self.err(entry, "syntax", "nu power must be a non-negative integer")
                return None
        parts = [p.strip() for p in body.split(",")] if body.strip() else []
        out = []
        for p in parts:
            try:
                k = int(p)
            except ValueError:
                self.err(entry, "syntax", f"index {p!r} is not an integer")
                return None
            if not 1 <= k <= dim:
                self.err(entry, "validation", f"index {k} out of range 1..{dim}")
                return None
            out.append(k - 1)
        if count is not None and len(out) != count:
            self.err(entry, "syntax", f"expected {count} indices, got {len(out)}")
            return None
        return nu, out


def _indexed(key):
    m = _INDEXED.match(key)
    if not m:
        return None, None
    return m.group(1), m.group(2)


def parse_chart_spec(text, *, name=""):
    """Parse and validate a chart spec; raises :class:`ChartSpecError` with located diagnostics."""
    try:
        return _parse(text, name)
    except ChartSpecError:
        raise
    except RecursionError:
        raise ChartSpecError([Diagnostic(1, 1, "unsupported", "input nested too deeply")]) from None


def _parse(text, name):
    if not isinstance(text, str):
        raise ChartSpecError([Diagnostic(1, 1, "syntax", "spec must be text")])
    sections, diags = _split_lines(text)
    b = _Builder(text)
    b.diags.extend(diags)
    if "chart" not in sections:
        b.err(1, "validation", "missing [chart] section")
        raise ChartSpecError(b.diags)
    chart_line, chart = sections["chart"]
    coords = None
    coords_entry = None
    order = None
    spec_name = name
    omega_entries = []
    for e in chart:
        if e.key == "coords":
            names = [c.strip() for c in e.value.split(",")]
            bad = [c for c in names if not _NAME.match(c) or c in RESERVED]
            if not names or bad:
                b.err(e, "syntax", f"invalid coordinate names {bad or names}", e.value_col)
            elif len(set(names)) != len(names):
                b.err(e, "validation", "duplicate coordinate names", e.value_col)
            else:
                coords = tuple(names)
                coords_entry = e
        elif e.key == "order":
            try:
                order = int(e.value)
                if order < 0 or order > 40:
                    raise ValueError
            except ValueError:
                b.err(e, "syntax", "order must be an integer in 0..40", e.value_col)
        elif e.key == "name":
            spec_name = e.value
        elif _indexed(e.key)[0] == "omega":
            omega_entries.append(e)
        else:
            b.err(e, "unsupported", f"unknown key {e.key!r} in [chart]")
    if coords is None:
        if not any(d.message.startswith("invalid coordinate") or "duplicate coordinate" in d.message for d in b.diags):
            b.err(chart_line, "validation", "[chart] needs 'coords = ...'")
        raise ChartSpecError(b.diags)
    if order is None and not any("order" in d.message for d in b.diags):
        b.err(chart_line, "validation", "[chart] needs 'order = N'")
    n = len(coords)
    if n % 2:
        b.err(coords_entry, "validation", f"dimension must be even, got {n}", coords_entry.value_col)
        raise ChartSpecError(b.diags)
    ring = CoordinateRing(coords)
    omega = [[None] * n for _ in range(n)]
    for e in omega_entries:
        idx = b.indices(e, _indexed(e.key)[1], 2, n)
        if idx is None:
            continue
        i, j = idx[1]
        v = b.expr(e, ring)
        if v is None:
            continue
        if i == j:
            if not v.is_zero():
                b.err(e, "validation", "omega must be antisymmetric (nonzero diagonal entry)")
            continue
        for (a, c, val) in ((i, j, v), (j, i, -v)):
            if omega[a][c] is not None and omega[a][c] != val:
                b.err(e, "validation", f"omega[{a + 1},{c + 1}] given inconsistently")
            omega[a][c] = val
    omega = [[ring.zero if v is None else v for v in row] for row in omega]

    gamma = [[[None] * n for _ in range(n)] for _ in range(n)]
    conn_line = None
    if "connection" in sections:
        conn_line, entries = sections["connection"]
        for e in entries:
            base, inner = _indexed(e.key)
            if base != "Gamma":
                b.err(e, "unsupported", f"unknown key {e.key!r} in [connection]")
                continue
            inner = inner.replace(";", ",")
            idx = b.indices(e, inner, 3, n)
            if idx is None:
                continue
            k, i, j = idx[1]
            v = b.expr(e, ring)
            if v is None:
                continue
            for a, c in ((i, j), (j, i)):
                if gamma[k][a][c] is not None and gamma[k][a][c] != v:
                    b.err(e, "validation", f"Gamma[{k + 1}; {a + 1},{c + 1}] given inconsistently (torsion)")
                gamma[k][a][c] = v
    gamma = [[[ring.zero if v is None else v for v in row] for row in mat] for mat in gamma]

    Omega = {}
    om_line = None
    if "omega2" in sections:
        om_line, entries = sections["omega2"]
        for e in entries:
            base, inner = _indexed(e.key)
            if base != "Omega":
                b.err(e, "unsupported", f"unknown key {e.key!r} in [omega2]")
                continue
            idx = b.indices(e, inner, 2, n, allow_nu=True)
            if idx is None:
                continue
            p, (i, j) = idx
            v = b.expr(e, ring)
            if v is None:
                continue
            if p == 0:
                b.err(e, "validation", "Omega must start at order nu^1 (Omega in nu Z^2[[nu]])")
                continue
            if i == j:
                if not v.is_zero():
                    b.err(e, "validation", "Omega must be antisymmetric")
                continue
            m = Omega.setdefault(p, [[None] * n for _ in range(n)])
            for a, c, val in ((i, j, v), (j, i, -v)):
                if m[a][c] is not None and m[a][c] != val:
                    b.err(e, "validation", f"Omega[{p}; {a + 1},{c + 1}] given inconsistently")
                m[a][c] = val
    Omega = {p: [[ring.zero if v is None else v for v in row] for row in m] for p, m in Omega.items()}

    s_terms = {}
    s_line = None
    if "s" in sections:
        s_line, entries = sections["s"]
        for e in entries:
            base, inner = _indexed(e.key)
            if base != "s":
                b.err(e, "unsupported", f"unknown key {e.key!r} in [s]")
                continue
            idx = b.indices(e, inner, None, n, allow_nu=True)
            if idx is None:
                continue
            p, ids = idx
            v = b.expr(e, ring)
            if v is None:
                continue
            expo = [0] * n
            for i in ids:
                expo[i] += 1
            if not ids:
                b.err(e, "validation", "s must satisfy sigma(s) = 0 (term without fiber variables)")
                continue
            if len(ids) + 2 * p < 3:
                b.err(e, "validation", "s must have total degree at least 3")
                continue
            key = (p, tuple(expo), ())
            s_terms[key] = s_terms[key] + v if key in s_terms else v

    basis, brackets, fields, J0 = [], {}, [], None
    lie_line = None
    if "lie_algebra" in sections:
        lie_line, entries = sections["lie_algebra"]
        basis_entry = next((e for e in entries if e.key == "basis"), None)
        if basis_entry is None:
            b.err(lie_line, "validation", "[lie_algebra] needs 'basis = ...'")
        else:
            names = [c.strip() for c in basis_entry.value.split(",")]
            if not names or any(not _NAME.match(c) for c in names) or len(set(names)) != len(names):
                b.err(basis_entry, "syntax", "invalid basis names", basis_entry.value_col)
            elif set(names) & (set(coords) | RESERVED):
                b.err(basis_entry, "validation", "basis names must differ from coordinate names", basis_entry.value_col)
            else:
                basis = names
        if basis:
            d = len(basis)
            pos = {nm: i for i, nm in enumerate(basis)}
            lie_ring = CoordinateRing(basis)
            fields = [None] * d
            J0 = [None] * d
            for e in entries:
                if e is basis_entry:
                    continue
                base, inner = _indexed(e.key)
                if base == "bracket":
                    parts = [t.strip() for t in inner.split(",")]
                    if len(parts) != 2 or any(t not in pos for t in parts):
                        b.err(e, "syntax", "expected bracket[a,b] with basis names")
                        continue
                    i, j = pos[parts[0]], pos[parts[1]]
                    v = b.expr(e, lie_ring)
                    if v is None:
                        continue
                    combo = _linear_combo(v, d)
                    if combo is None:
                        b.err(e, "validation", "bracket must be a linear combination of basis elements", e.value_col)
                        continue
                    for key, cmb in (((i, j), combo), ((j, i), {k: -c for k, c in combo.items()})):
                        if key in brackets and brackets[key] != cmb:
                            b.err(e, "validation", "bracket given inconsistently (not antisymmetric)")
                        brackets[key] = cmb
                elif base in ("field", "J0"):
                    nm = inner.strip()
                    if nm not in pos:
                        b.err(e, "syntax", f"unknown basis element {nm!r}")
                        continue
                    k = pos[nm]
                    if base == "J0":
                        v = b.expr(e, ring)
                        if v is not None:
                            J0[k] = v
                        continue
                    comps = _split_top(e.value)
                    if len(comps) != n:
                        b.err(e, "syntax", f"field needs {n} components, got {len(comps)}", e.value_col)
                        continue
                    vals = []
                    for text_c, off in comps:
                        v = b.expr(e, ring, text=text_c, offset=e.value_col + off)
                        if v is None:
                            break
                        vals.append(v)
                    else:
                        fields[k] = VectorField(vals)
                else:
                    b.err(e, "unsupported", f"unknown key {e.key!r} in [lie_algebra]")
            for k, f in enumerate(fields):
                if f is None and not b.diags:
                    b.err(lie_line, "validation", f"missing field[{basis[k]}]")
            if all(j is None for j in J0):
                J0 = None
            elif any(j is None for j in J0):
                b.err(lie_line, "validation", "J0 must be given for every basis element or none")
                J0 = None

    probe_texts, probes = [], []
    if "probes" in sections:
        for e in sections["probes"][1]:
            if e.key not in ("f", "probe"):
                b.err(e, "unsupported", f"unknown key {e.key!r} in [probes]")
                continue
            v = b.expr(e, ring)
            if v is not None:
                probe_texts.append(e.value)
                probes.append(v)

    if conn_line is None and not b.diags:
        for e in omega_entries:
            if not b.expr(e, ring).is_constant():
                b.err(e, "validation", "omega is not constant; a [connection] section is required", e.value_col)
    if b.diags:
        raise ChartSpecError(b.diags)

    try:
        geom = ChartGeometry(ring, omega, gamma, name=spec_name)
    except GeometryError as e:
        line = conn_line if "connection" in e.invariant and conn_line else chart_line
        raise ChartSpecError([Diagnostic(line, 1, "validation", str(e))]) from None
    spec = ChartSpec(
        name=spec_name or "chart",
        coords=coords,
        order=order,
        geometry=geom,
        Omega=Omega,
        s_terms=s_terms,
        lie_basis=basis,
        lie_brackets=brackets,
        lie_fields=fields,
        J0=J0,
        probe_texts=probe_texts,
        probes=probes,
        source=text,
    )
    try:
        spec.setup(order=min(order, 2))
    except SetupError as e:
        line = om_line if "Omega" in str(e) and om_line else (s_line or chart_line)
        raise ChartSpecError([Diagnostic(line, 1, "validation", str(e))]) from None
    if basis:
        try:
            spec.action()
        except ActionError as e:
            raise ChartSpecError([Diagnostic(lie_line, 1, "validation", str(e))]) from None
    return spec


def _split_top(text):
    """Split on top-level commas; returns ``[(piece, offset)]``."""
    out = []
    depth = 0
    start = 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            out.append((text[start:i], start))
            start = i + 1
    out.append((text[start:], start))
    cleaned = []
    for piece, off in out:
        lead = len(piece) - len(piece.lstrip())
        cleaned.append((piece.strip(), off + lead))
    return cleaned


def _linear_combo(v, d):
    if not v.is_polynomial():
        return None
    out = {}
    for exps, c in zip(v.num.monoms(), v.num.coeffs()):
        if sum(exps) != 1:
            return None
        k = exps.index(1)
        out[k] = Fraction(int(c.p), int(c.q))
    return out


def parse_formal_function(text, ring):
    """Parse an expression that may contain ``nu`` polynomially; returns ``{nu_power: coeff}``."""
    ext = CoordinateRing(tuple(ring.names) + ("nu",))
    v = parse_expression(text, ext)
    n = ring.dim
    den = {}
    for exps, c in zip(v.den.monoms(), v.den.coeffs()):
        if exps[n]:
            raise ExpressionError("nu may not appear in a denominator", 1)
        den[exps[:n]] = c
    den = ring.ctx.from_dict(den)
    by_nu = {}
    for exps, c in zip(v.num.monoms(), v.num.coeffs()):
        by_nu.setdefault(exps[n], {})[exps[:n]] = c
    out = {}
    for k, d in by_nu.items():
        f = RationalFunction.from_parts(ring.ctx.from_dict(d), den)
        if not f.is_zero():
            out[k] = f
    return out


def load_chart_spec(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_chart_spec(text, name=os.path.splitext(os.path.basename(path))[0])
