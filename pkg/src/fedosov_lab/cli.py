"""Command line front end: ``fedosov-lab <command> --spec FILE [options]``.

Exit status: 0 computed, 1 obstruction found, 2 input error.
"""

from __future__ import annotations

import argparse
import itertools
import os
import sys

from .calculus import (
    curvature_element,
    delta,
    delta_inv,
    exterior_d,
    nabla_operator,
    sigma_project,
)
from .chartspec import ChartSpecError, load_chart_spec, parse_formal_function
from .fedosov import EngineConsistencyError, normalize_triple, triple_equivalence
from .invariance import (
    Absent,
    NotADerivation,
    classical_mm_check,
    default_probes,
    invariance_report,
    lambda_cocycle,
    quantum_hamiltonian,
    solve_qmm,
    strong_invariance_check,
)
from .sampling import make_rng, random_element, random_polynomial
from .scalar import ExpressionError, ScalarError

HEADER = "fedosov-lab report v1"
EXIT_OK, EXIT_OBSTRUCTION, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


class Report:
    def __init__(self, command, specs, setup):
        self.lines = [HEADER, f"command: {command}"]
        for sp in specs:
            self.lines.append(f"spec: {sp.name} (coords {', '.join(sp.coords)}; dim {len(sp.coords)})")
        self.lines += [
            "conventions:",
            "  Lambda = -omega^-1, so x*y - y*x = ν for omega = dx∧dy",
            "  Poisson bracket {f,g} = Lambda^ij d_i f d_j g",
            "  Hamiltonian fields: i_X omega = dH; rho(xi) = -L_(X_xi)",
            "  curvature: R^t_jkl = d_k G^t_lj - d_l G^t_kj + G^t_km G^m_lj - G^t_lm G^m_kj",
            f"  truncation order N = {setup.N}",
            f"  certified ν-order = {setup.N // 2}",
        ]

    def add(self, line=""):
        self.lines.append(line)

    def section(self, title):
        self.lines.append(f"{title}:")

    def text(self):
        return "\n".join(self.lines) + "\n"


def _wrap(txt):
    return txt if all(ch not in txt for ch in " +-") else f"({txt})"


def _fn(setup, text, what):
    try:
        coeffs = parse_formal_function(text, setup.geom.ring)
    except (ExpressionError, ScalarError) as e:
        raise InputError(f"cannot parse {what} {text!r}: {e}") from None
    return setup.function(coeffs)


def _probes(spec, setup, extra):
    out = [setup.function(p) for p in spec.probes]
    for t in extra or []:
        out.append(_fn(setup, t, "--probe"))
    if not out:
        out = [setup.function(p) for p in default_probes(setup.geom.ring, 2)]
    return out


def _need_action(spec):
    if not spec.has_action():
        raise InputError(f"spec {spec.name!r} has no [lie_algebra] section")
    return spec.action()


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_star(args, specs, setup):
    if not args.f or not args.g:
        raise InputError("star needs --f and --g")
    f = _fn(setup, args.f, "--f")
    g = _fn(setup, args.g, "--g")
    rep = Report("star", specs, setup)
    p = setup.star(f, g)
    rep.section("result")
    rep.add(f"  {_wrap(str(f))}*{_wrap(str(g))} = {p}")
    order = p.certified_nu_order()
    rep.add(f"certified through ν^{setup.N // 2 if order is None else order}")
    return rep, EXIT_OK


def _suite(rep, name, oks, count):
    ok = all(oks)
    noun = "sample" if count == 1 else "samples"
    rep.add(f"  {'PASS' if ok else 'FAIL'} {name} ({count} {noun})")
    return ok


def cmd_verify(args, specs, setup):
    rep = Report("verify", specs, setup)
    rng = make_rng(args.seed)
    geom, alg = setup.geom, setup.alg
    n = args.samples
    els = [random_element(alg, rng, rational=not geom.is_flat()) for _ in range(n)]
    pos = [random_element(alg, rng, dega=rng.randint(1, geom.dim)) for _ in range(n)]
    R = curvature_element(geom, alg)
    rep.section("identity suites")
    res = []

    def nab(a):
        return nabla_operator(geom, a)

    res.append(_suite(rep, "delta^2 = 0", [delta(delta(a)).is_zero() for a in els], n))
    res.append(_suite(rep, "(delta^-1)^2 = 0", [delta_inv(delta_inv(a)).is_zero() for a in els], n))
    res.append(_suite(rep, "delta delta^-1 + delta^-1 delta + sigma = id",
                      [(delta(delta_inv(a)) + delta_inv(delta(a)) + sigma_project(a) - a).is_zero() for a in els], n))
    res.append(_suite(rep, "[delta, nabla] = 0", [(delta(nab(a)) + nab(delta(a))).is_zero() for a in els], n))
    res.append(_suite(rep, "nabla^2 = -(1/ν) ad(R)", [(nab(nab(a)) + alg.ad_nu(R, a)).is_zero() for a in els], n))
    res.append(_suite(rep, "delta R = 0 and nabla R = 0", [delta(R).is_zero() and nab(R).is_zero()], 1))
    eq, seq = setup.r_residual()
    res.append(_suite(rep, "r: fixed-point residual and delta^-1 r = s", [eq.is_zero() and seq.is_zero()], 1))
    res.append(_suite(rep, "D^2 = 0", [setup.D(setup.D(a)).is_zero() for a in els], n))
    res.append(_suite(rep, "D D^-1 + D^-1 D = id on dega >= 1",
                      [(setup.D(setup.D_inv(a)) + setup.D_inv(setup.D(a)) - a).is_zero() for a in pos], n))
    fs = [setup.function(random_polynomial(geom.ring, rng, 3)) for _ in range(max(3, n // 4))]
    res.append(_suite(rep, "sigma(tau f) = f and D tau f = 0",
                      [(sigma_project(setup.tau(f)) - f).is_zero() and setup.D(setup.tau(f)).is_zero() for f in fs], len(fs)))
    res.append(_suite(rep, "tau f = f - D^-1(1 ⊗ df)",
                      [(setup.tau(f) - setup.tau_via_D_inv(f)).is_zero() for f in fs], len(fs)))
    trip = list(zip(fs, fs[1:] + fs[:1], fs[2:] + fs[:2]))
    res.append(_suite(rep, "(f*g)*h = f*(g*h)",
                      [(setup.star(setup.star(f, g), h) - setup.star(f, setup.star(g, h))).is_zero() for f, g, h in trip],
                      len(trip)))
    corr = []
    for f, g in zip(fs, fs[1:]):
        d = setup.star(f, g) - setup.star(g, f)
        first = d.homogeneous(nu=1)
        pb = geom.poisson(f.coefficient(), g.coefficient())
        corr.append(d.homogeneous(nu=0).is_zero() and (first - setup.function({1: pb})).is_zero())
    res.append(_suite(rep, "f*g - g*f = ν{f,g} + O(ν^2)", corr, len(corr)))
    ok = all(res)
    rep.add(f"verdict: {'all identities hold' if ok else 'identity failures found'}")
    return rep, EXIT_OK if ok else EXIT_OBSTRUCTION


def cmd_invariance(args, specs, setup):
    spec = specs[0]
    action = _need_action(spec)
    rep = Report("invariance", specs, setup)
    result = invariance_report(setup, action)
    if result.normalized:
        rep.add("note: s was normalized first (s' without symmetric degree 1, minimal total degree 4)")
    for g in result.generators:
        rep.section(f"generator {g.name}")
        rep.add(f"  X = {g.X}")
        rep.add(f"  T_X = {g.T_X}")
        rep.add(f"  L_X Omega = {g.lie_Omega}")
        rep.add(f"  L_X s = {g.lie_s}")
        rep.add(f"  derivation of *: {'yes' if g.is_derivation else 'no'}")
        if g.witness is not None:
            f, h = g.witness
            rep.add(f"  Leibniz witness: f = {f}, g = {h}, residual = {g.witness_residual}")
        elif g.is_derivation:
            rep.add("  Leibniz probe: no violation")
        else:
            rep.add("  Leibniz probe: no violation found on the probe set (probe inconclusive)")
    rep.add(f"verdict: {'g-invariant' if result.is_g_invariant else 'not g-invariant'}")
    return rep, EXIT_OK if result.is_g_invariant else EXIT_OBSTRUCTION


def _hamiltonian(setup, spec, action, probes):
    return quantum_hamiltonian(setup, action, probes, J0=spec.J0)


def cmd_hamiltonian(args, specs, setup):
    spec = specs[0]
    action = _need_action(spec)
    rep = Report("hamiltonian", specs, setup)
    probes = _probes(spec, setup, args.probe)
    try:
        qh = _hamiltonian(setup, spec, action, probes)
    except NotADerivation as e:
        rep.add(f"obstruction: {e}")
        return rep, EXIT_OBSTRUCTION
    if isinstance(qh, Absent):
        rep.add(f"obstruction: {qh.reason}")
        rep.add(f"witness: {_fmt_witness(qh.witness)}")
        return rep, EXIT_OBSTRUCTION
    rep.section("quantum Hamiltonian")
    for i, name in enumerate(action.basis):
        rep.add(f"  J({name}) = {qh.J[i]}")
    rep.add(f"verified: rho(xi) = (1/ν) ad_*(J(xi)) on {len(probes)} probe functions")
    rep.add(f"ambiguity: C^1(g,C)[[ν]] of dimension {qh.ambiguity_dim}")
    if spec.J0 is not None:
        cc = classical_mm_check(action, spec.J0)
        rep.add(f"classical J0: hamiltonian {'yes' if cc.hamiltonian else 'no'}, equivariant {'yes' if cc.equivariant else 'no'}")
    return rep, EXIT_OK


def _fmt_witness(w):
    if isinstance(w, dict):
        return "; ".join(f"{k} = {_fmt_witness(w[k])}" for k in sorted(w))
    if isinstance(w, (list, tuple)):
        return "(" + ", ".join(_fmt_witness(v) for v in w) + ")"
    return str(w)


def cmd_qmm(args, specs, setup):
    spec = specs[0]
    action = _need_action(spec)
    rep = Report("qmm", specs, setup)
    probes = _probes(spec, setup, args.probe)
    try:
        qh = _hamiltonian(setup, spec, action, probes)
    except NotADerivation as e:
        rep.add(f"obstruction: {e}")
        return rep, EXIT_OBSTRUCTION
    if isinstance(qh, Absent):
        rep.add(f"obstruction: no quantum Hamiltonian ({qh.reason})")
        rep.add(f"witness: {_fmt_witness(qh.witness)}")
        return rep, EXIT_OBSTRUCTION
    rep.section("quantum Hamiltonian")
    for i, name in enumerate(action.basis):
        rep.add(f"  J({name}) = {qh.J[i]}")
    lam = lambda_cocycle(setup, action, qh)
    rep.section("lambda cocycle")
    if action.dim < 2:
        rep.add("  λ = 0 (one-dimensional Lie algebra)")
    for (i, j), v in lam.lam.items():
        rep.add(f"  λ({action.basis[i]},{action.basis[j]}) = {v}")
    rep.add(f"  explicit formula and star commutators agree through ν^{lam.certified_nu_order}")
    if spec.J0 is not None:
        cc = classical_mm_check(action, spec.J0)
        rep.add(f"classical J0: hamiltonian {'yes' if cc.hamiltonian else 'no'}, equivariant {'yes' if cc.equivariant else 'no'}")
        if cc.hamiltonian:
            si = strong_invariance_check(setup, action, spec.J0, probes)
            bad = [nm for nm, c in si.contractions.items() if not c.is_zero()]
            if si.strongly_invariant:
                rep.add("strongly invariant: yes (i_X Omega = 0 for all generators)")
            else:
                rep.add(f"strongly invariant: no (i_X Omega ≠ 0 for {', '.join(bad)})")
    res = solve_qmm(setup, action, qh, lam)
    if isinstance(res, Absent):
        rep.add("obstruction: [λ] ≠ 0 in H²₀(g,C)[[ν]]")
        rep.add(f"witness: {_fmt_witness(res.witness)}")
        return rep, EXIT_OBSTRUCTION
    rep.section("quantum momentum mapping")
    for i, name in enumerate(action.basis):
        rep.add(f"  J({name}) = {res.J[i]}")
    shift = [f"a({action.basis[k[0]]}) = {v}" for k, v in res.a.items() if not v.is_zero()]
    rep.add(f"  shift a: {', '.join(shift) if shift else '0'}")
    rep.add(f"verified: (1/ν)(J(xi)*J(eta) - J(eta)*J(xi)) = J([xi,eta]) on {len(res.checked)} basis pairs")
    rep.add(f"ambiguity: Z^1_0(g,C)[[ν]] of dimension {res.ambiguity_dim}")
    return rep, EXIT_OK


def cmd_equiv(args, specs, setup):
    if len(specs) != 2:
        raise InputError("equiv needs exactly two --spec files")
    A = setup
    B = specs[1].setup(args.order)
    rep = Report("equiv", specs, setup)
    res = triple_equivalence(A, B)
    rep.add(f"equivalent (D = D'): {'yes' if res.equivalent else 'no'}")
    if res.vartheta is not None:
        rep.add(f"vartheta = {res.vartheta}")
    if not res.equivalent:
        rep.add(f"reason: {res.reason}")
        return rep, EXIT_OBSTRUCTION
    probes = _probes(specs[0], setup, args.probe)
    agree = 0
    for f, g in itertools.product(probes, repeat=2):
        if not (A.star(f, g) - B.star(B.function(dict(f.nu_coefficients())), B.function(dict(g.nu_coefficients())))).is_zero():
            raise EngineConsistencyError(f"equivalent setups give different f*g for f = {f}, g = {g}")
        agree += 1
    rep.add(f"star products agree on {agree} probe pairs")
    return rep, EXIT_OK


def _spec_text(setup):
    geom = setup.geom
    n = geom.dim
    out = ["[chart]", f"name = {setup.name or 'normalized'}", f"coords = {', '.join(geom.coords)}", f"order = {setup.N}"]
    for i in range(n):
        for j in range(i + 1, n):
            if not geom.omega[i][j].is_zero():
                out.append(f"omega[{i + 1},{j + 1}] = {geom.omega[i][j]}")
    conn = []
    for k in range(n):
        for i in range(n):
            for j in range(i, n):
                v = geom.gamma[k][i][j]
                if not v.is_zero():
                    conn.append(f"Gamma[{k + 1}; {i + 1},{j + 1}] = {v}")
    if conn:
        out += ["", "[connection]"] + conn
    om = []
    for (nu, _, (i, j)), c in setup.Omega.sorted_terms():
        om.append(f"Omega[{nu}; {i + 1},{j + 1}] = {c}")
    if om:
        out += ["", "[omega2]"] + om
    ss = []
    for (nu, alpha, _), c in setup.s.sorted_terms():
        idx = ",".join(str(i + 1) for i, e in enumerate(alpha) for _ in range(e))
        ss.append(f"s[{nu}; {idx}] = {c}")
    if ss:
        out += ["", "[s]"] + ss
    return out


def cmd_normalize(args, specs, setup):
    rep = Report("normalize", specs, setup)
    new = normalize_triple(setup)
    if new is setup:
        rep.add("s is already normalized; setup unchanged")
    eq = triple_equivalence(setup, new)
    if not eq.equivalent:
        raise EngineConsistencyError("normalized setup is not equivalent to the input")
    rep.add(f"equivalent to input: yes (vartheta = {eq.vartheta})")
    rep.section("normalized spec")
    text = _spec_text(new)
    for line in text:
        rep.add(f"  {line}" if line else "")
    if args.spec_out:
        with open(args.spec_out, "w", encoding="utf-8") as fh:
            fh.write("\n".join(text) + "\n")
        rep.add(f"written to {os.path.basename(args.spec_out)}")
    return rep, EXIT_OK


COMMANDS = {
    "star": cmd_star,
    "verify": cmd_verify,
    "invariance": cmd_invariance,
    "hamiltonian": cmd_hamiltonian,
    "qmm": cmd_qmm,
    "equiv": cmd_equiv,
    "normalize": cmd_normalize,
}


def build_parser():
    p = argparse.ArgumentParser(prog="fedosov-lab", description="Exact Fedosov star products on symplectic charts.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--spec", action="append", required=True, metavar="FILE", help="chart spec file (equiv takes two)")
    p.add_argument("--order", type=int, metavar="N", help="override the truncation order given in the chart file")
    p.add_argument("--f", metavar="EXPR", help="first factor (may use nu)")
    p.add_argument("--g", metavar="EXPR", help="second factor (may use nu)")
    p.add_argument("--probe", action="append", metavar="EXPR", help="probe function (repeatable)")
    p.add_argument("--out", metavar="FILE", help="write the report to FILE instead of stdout")
    p.add_argument("--spec-out", metavar="FILE", help="also write the normalized spec to FILE (normalize)")
    p.add_argument("--samples", type=int, default=20, help="random samples per identity suite (verify)")
    p.add_argument("--seed", type=int, default=0, help="seed for verify samples")
    return p


def run_command(argv):
    """Returns ``(report_text, exit_status)``; never raises for user errors."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return "", EXIT_INPUT if e.code else EXIT_OK
    try:
        if args.order is not None and not 0 <= args.order <= 40:
            raise InputError("--order must be in 0..40")
        if args.command != "equiv" and len(args.spec) != 1:
            raise InputError(f"{args.command} takes exactly one --spec")
        specs = [load_chart_spec(path) for path in args.spec]
        setup = specs[0].setup(args.order)
        rep, status = COMMANDS[args.command](args, specs, setup)
        return rep.text(), status
    except ChartSpecError as e:
        return _error_text(str(e)), EXIT_INPUT
    except (InputError, OSError) as e:
        return _error_text(str(e)), EXIT_INPUT
    except ValueError as e:
        return _error_text(f"{type(e).__name__}: {e}"), EXIT_INPUT


def _error_text(msg):
    return f"{HEADER}\nerror:\n" + "".join(f"  {line}\n" for line in msg.splitlines())


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    text, status = run_command(argv)
    args_out = None
    if "--out" in argv:
        i = argv.index("--out")
        args_out = argv[i + 1] if i + 1 < len(argv) else None
    if text:
        if args_out and status != EXIT_INPUT:
            with open(args_out, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            stream = sys.stdout if status != EXIT_INPUT else sys.stderr
            try:
                stream.reconfigure(encoding="utf-8")
            except (AttributeError, ValueError):
                pass
            stream.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
