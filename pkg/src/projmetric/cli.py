"""Command-line front end: ``projmetric <subcommand> ...``.

Every report starts with ``#`` header lines recording the version, seed,
tolerances and input hashes. Only the ``# generated`` line depends on the
wall clock.

Exit codes: 0 success, 1 assertion failure, 2 input error, 3 numeric
indeterminacy.
"""

from __future__ import annotations

import argparse
import hashlib
import re
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    DegenerateMetricError,
    DomainError,
    IndeterminateError,
    IntegrationError,
    InvalidParameterError,
    ParseError,
    PreconditionError,
    UnboundParameterError,
)

EXIT_OK, EXIT_ASSERT, EXIT_INPUT, EXIT_INDETERMINATE = 0, 1, 2, 3

_CATALOG_RE = re.compile(r"^(1a|1b|1c|2a|2b|2c)(?::(.*))?$")


# ---------------------------------------------------------------------------
# reports


def fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (complex, np.complexfloating)):
        if v.imag == 0:
            return fmt(float(v.real))
        return f"{v.real + 0.0:.12g}{v.imag + 0.0:+.12g}j"
    if isinstance(v, (float, np.floating)):
        return f"{float(v) + 0.0:.12g}"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(fmt(x) for x in v)
    return str(v)


class Report:
    def __init__(self, command: str, args: argparse.Namespace):
        self.command = command
        self.args = args
        self.inputs: list[tuple[str, str]] = []
        self.rows: list[tuple[str, str]] = []

    def input(self, name: str, text: str):
        self.inputs.append((name, hashlib.sha256(text.encode()).hexdigest()))

    def put(self, key: str, value):
        self.rows.append((key, fmt(value)))

    def section(self, title: str):
        self.rows.append(("#", title))

    def render(self) -> str:
        a = self.args
        head = [
            f"# projmetric {__version__}",
            f"# command = {self.command}",
            f"# seed = {a.seed}",
            f"# tol = {fmt(a.tol)}",
            f"# samples = {a.samples}",
        ]
        head += [f"# input {name} sha256 = {h}" for name, h in self.inputs]
        head.append(f"# generated = {datetime.now(timezone.utc).isoformat(timespec='seconds')}")
        sep = " = " if a.format == "keyvalue" else ": "
        body = []
        for k, v in self.rows:
            if k == "#":
                body.append(f"# {v}" if a.format == "keyvalue" else f"\n[{v}]")
            else:
                body.append(f"{k}{sep}{v}")
        return "\n".join(head + body) + "\n"

    def emit(self):
        text = self.render()
        if self.args.out:
            Path(self.args.out).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)


# ---------------------------------------------------------------------------
# input handling


def parse_params(text: str | None) -> dict[str, float]:
    out: dict[str, float] = {}
    if not text:
        return out
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise InvalidParameterError(f"expected name=value, got {item!r}")
        k, v = (s.strip() for s in item.split("=", 1))
        try:
            out[k] = float(v)
        except ValueError:
            raise InvalidParameterError(f"bad number for {k}: {v!r}") from None
    return out


def catalog_ref(text: str):
    m = _CATALOG_RE.match(text.strip())
    if not m:
        raise InvalidParameterError(f"not a catalog reference: {text!r} (expected e.g. 2c:a=1,c=1,eps1=1,eps2=1)")
    return m.group(1), parse_params(m.group(2))


def load_source(ref: str, report: Report):
    """A metric or connection from a spec file or ``ID:params`` catalog reference.

    Returns ``(metric or None, connection)``.
    """
    from .catalog import instantiate
    from .geometry import metric_from_spec
    from .projective import connection_from_spec, connection_of

    path = Path(ref)
    if path.is_file():
        text = path.read_text(encoding="utf-8")
        report.input(path.name, text)
        if re.search(r"^\s*K0\s*=", text, re.M):
            return None, connection_from_spec(text, label=path.name)
        g = metric_from_spec(text, label=path.name)
        return g, connection_of(g)
    if _CATALOG_RE.match(ref.strip()):
        report.input("catalog", ref.strip())
        g = instantiate(*catalog_ref(ref))
        return g, connection_of(g)
    raise FileNotFoundError(f"no such spec file or catalog reference: {ref}")


def load_field(args, report: Report):
    from .projective import field_
    from .specfile import parse_spec

    if args.field_file:
        text = Path(args.field_file).read_text(encoding="utf-8")
        report.input(Path(args.field_file).name, text)
        spec = parse_spec(text, {"Z1", "Z2"})
        if set(spec.exprs) != {"Z1", "Z2"}:
            raise ParseError("vector field file needs Z1 and Z2")
        return field_(spec.exprs["Z1"], spec.exprs["Z2"]), spec.params
    parts = args.field.split(",")
    if len(parts) != 2:
        raise ParseError("--field expects 'Z1, Z2'")
    report.input("field", args.field)
    return field_(parts[0].strip(), parts[1].strip()), {}


def probe_points(domain, n: int, env):
    from .geometry import sample_points

    return sample_points(domain, n, env, seed=1)


# ---------------------------------------------------------------------------
# subcommands


def cmd_analyze(args) -> int:
    from .expr import compile_exprs
    from .geometry import grad_norm_sq, laplacian, scalar_curvature
    from .projective import is_flat, liouville_values

    rep = Report("analyze", args)
    g, pc = load_source(args.source, rep)
    s = pc.samples(args.samples) if g is None else g.samples(args.samples, args.seed)
    env = pc.env
    pr = probe_points(pc.domain, args.probes, env)
    kv = compile_exprs(list(pc.K), env)(pr.xs, pr.ys)
    rep.section("projective connection")
    for i, k in enumerate(pc.K):
        rep.put(f"K{i}", str(k))
    L1, L2 = liouville_values(pc, s)
    flat = is_flat(pc, s, tol=args.tol)
    rep.put("flat", flat)
    rep.put("L1.max_abs", float(np.max(np.abs(L1))))
    rep.put("L2.max_abs", float(np.max(np.abs(L2))))
    L1p, L2p = liouville_values(pc, pr)
    rep.section("probes")
    for j in range(len(pr.xs)):
        tag = f"probe[{j}]"
        rep.put(f"{tag}.point", (pr.xs[j], pr.ys[j]))
        rep.put(f"{tag}.K", [kv[i][j] for i in range(4)])
        rep.put(f"{tag}.L1", L1p[j])
        rep.put(f"{tag}.L2", L2p[j])
    if g is not None:
        R = scalar_curvature(g)
        vals = compile_exprs([R, grad_norm_sq(g, R), laplacian(g, R)], g.env)(pr.xs, pr.ys)
        for j in range(len(pr.xs)):
            rep.put(f"probe[{j}].R_I_dR", [vals[0][j], vals[1][j], vals[2][j]])
    rep.emit()
    return EXIT_OK


def cmd_symmetry(args) -> int:
    from .projective import symmetry_residual

    rep = Report("symmetry", args)
    g, pc = load_source(args.source, rep)
    Z, fparams = load_field(args, rep)
    env = dict(fparams)
    env.update(pc.env)
    s = pc.samples(args.samples) if g is None else g.samples(args.samples, args.seed)
    res = symmetry_residual(pc, Z, s, env)
    rep.put("field", str(Z))
    rep.put("residual.max_abs", res.max_abs)
    for i, r in enumerate(res.per_equation):
        rep.put(f"residual.eq{i}", r)
    rep.put("symmetric", res.max_abs <= args.tol)
    rep.emit()
    return EXIT_OK


def cmd_flatness(args) -> int:
    from .projective import abcd_connection, abcd_flatness_pair, is_flat, liouville_values

    rep = Report("flatness", args)
    if args.abcd:
        A, B, C, D = args.abcd
        rep.input("abcd", fmt(args.abcd))
        pc = abcd_connection(A, B, C, D)
        e1, e2 = abcd_flatness_pair(A, B, C, D)
        rep.put("pair", (e1, e2))
    else:
        if not args.source:
            raise InvalidParameterError("flatness needs a source or --abcd")
        _, pc = load_source(args.source, rep)
    s = pc.samples(args.samples)
    L1, L2 = liouville_values(pc, s)
    rep.put("L1.max_abs", float(np.max(np.abs(L1))))
    rep.put("L2.max_abs", float(np.max(np.abs(L2))))
    rep.put("flat", is_flat(pc, s, tol=args.tol))
    rep.emit()
    return EXIT_OK


def _complex(text: str) -> complex:
    try:
        return complex(text.replace("i", "j").replace(" ", ""))
    except ValueError:
        raise InvalidParameterError(f"bad alpha {text!r}") from None


def cmd_mobility(args) -> int:
    from .liouville import ABCDConnection, build_ode_system, ode_residual, reassembly_residual, solution_space

    rep = Report("mobility", args)
    rep.input("abcd", fmt([args.A, args.B, args.C, args.D]))
    alphas = [_complex(a) for a in args.alpha.split(",")] if args.alpha else 0.0
    sys_ = build_ode_system(
        ABCDConnection(args.A, args.B, args.C, args.D), args.case, alphas, args.displayed_constraint
    )
    space = solution_space(sys_, tuple(args.x_range), args.check_points)
    rep.put("case", args.case)
    rep.put("alphas", list(sys_.alphas))
    rep.put("x_range", args.x_range)
    rep.put("dimension", space.dimension)
    rep.put("singular_values", space.singular_values / space.singular_values[0])
    for j, col in enumerate(space.basis.T):
        rep.put(f"basis[{j}]", col)
    if space.dimension:
        rep.put("ode_residual", ode_residual(space))
        rep.put("lin1_reassembly_residual", reassembly_residual(space))
    rep.emit()
    return EXIT_OK


def cmd_catalog(args) -> int:
    from .catalog import (
        NORMAL_FORMS,
        fingerprint,
        instantiate,
        killing_class,
        killing_field,
        killing_residual,
        projective_fields,
    )
    from .projective import connection_of, symmetry_residual

    rep = Report("catalog", args)
    id_, p = catalog_ref(args.entry)
    rep.input("catalog", args.entry)
    g = instantiate(id_, p)
    s = g.samples(args.samples, args.seed)
    rep.put("id", id_)
    rep.put("label", g.label)
    rep.put("E", str(g.E))
    rep.put("G", str(g.G))
    rep.put("dim_p", NORMAL_FORMS[id_].sym_dim)
    rep.put("killing_class", killing_class(id_, p) or "none")
    rep.put("killing_residual", killing_residual(g, killing_field(), s))
    pc = connection_of(g)
    for j, Z in enumerate(projective_fields(id_, p)):
        rep.put(f"field[{j}]", str(Z))
        rep.put(f"field[{j}].residual", symmetry_residual(pc, Z, s).max_abs)
    probes = tuple(args.probe) if args.probe else None
    fp = fingerprint(id_, p, probes) if probes else fingerprint(id_, p)
    rep.put("probes", fp.probes)
    rep.put("R", fp.values[0])
    rep.put("I", fp.values[1])
    rep.put("dR", fp.values[2])
    if fp.at_zero is not None:
        rep.put("R_at_x0", fp.at_zero[0])
        rep.put("dR_at_x0", fp.at_zero[1])
    rep.emit()
    return EXIT_OK


def cmd_distinguish(args) -> int:
    from .catalog import distinguish

    rep = Report("distinguish", args)
    rep.input("a", args.a)
    rep.input("b", args.b)
    (ia, pa), (ib, pb) = catalog_ref(args.a), catalog_ref(args.b)
    v = distinguish(ia, pa, ib, pb)
    rep.put("verdict", str(v))
    rep.put("kind", v.kind)
    rep.put("witness", v.witness or "none")
    if v.detail:
        rep.put("detail", v.detail)
    rep.emit()
    return EXIT_OK


def cmd_geodesic(args) -> int:
    from .flow import (
        integrate_batch,
        integral_drift,
        form_values,
        koenigs_suite,
        random_states,
        superintegrable_suite,
    )

    rep = Report("geodesic", args)
    forms = []
    env = {}
    if args.suite == "koenigs":
        rep.input("suite", "koenigs")
        g, S = koenigs_suite()
        forms, env = list(S), S.env
    elif args.suite == "superintegrable":
        rep.input("suite", f"superintegrable D={fmt(args.D)}")
        g, S = superintegrable_suite(args.D)
        forms, env = list(S), S.env
    else:
        if not args.source:
            raise InvalidParameterError("geodesic needs a source or --suite")
        g, _ = load_source(args.source, rep)
        if g is None:
            raise InvalidParameterError("geodesic needs a metric, not a connection")
    if args.state:
        s0 = np.array([args.state], float)
        if not g.domain.contains(s0[0, 0], s0[0, 1]):
            raise InvalidParameterError("initial point outside the domain")
        if s0[0, 2] == 0 and s0[0, 3] == 0:
            raise InvalidParameterError("initial velocity must be nonzero")
    else:
        s0 = random_states(g, args.trials, args.seed)
    tr = integrate_batch(g, s0, args.T, args.h)
    rep.put("metric", g.label)
    rep.put("T", args.T)
    rep.put("h", args.h)
    rep.put("trajectories", s0.shape[0])
    rep.put("steps", len(tr.t))
    rep.put("valid_steps", tr.valid)
    rep.put("clipped", [bool(c) for c in tr.clipped])
    rep.put("final_state[0]", tr.single(0)[-1])
    worst = 0.0
    for lab, F in forms:
        d = integral_drift(tr, F, env)
        worst = max(worst, d)
        rep.put(f"drift.{lab}", d)
    if forms:
        rep.put("drift.max", worst)
        rep.put("drift.ok", worst <= args.drift_tol)
    if args.dump:
        st = tr.single(0)
        cols = [form_values(F, tr, env)[: len(st), 0] for _, F in forms]
        head = "# t x y vx vy" + "".join(f" {lab}" for lab, _ in forms)
        lines = [head]
        for k in range(len(st)):
            row = [tr.t[k], *st[k], *(c[k] for c in cols)]
            lines.append(" ".join(f"{v:.15g}" for v in row))
        Path(args.dump).write_text("\n".join(lines) + "\n", encoding="utf-8")
        rep.put("dump", args.dump)
    rep.emit()
    return EXIT_ASSERT if forms and worst > args.drift_tol else EXIT_OK


def cmd_verify(args) -> int:
    from .acceptance import CRITERIA

    rep = Report("verify", args)
    failed = 0
    only = set(args.criterion or [])
    for n, fn in enumerate(CRITERIA, start=1):
        if only and n not in only:
            continue
        res = fn()
        failed += not res.passed
        rep.put(f"criterion.{n}", f"{'PASS' if res.passed else 'FAIL'} {res.title}")
        for c in res.checks:
            mark = "ok" if c.ok else "FAIL"
            v = c.value if isinstance(c.value, str) else fmt(c.value)
            rep.put(f"criterion.{n}.check", f"{mark} {c.label} = {v} (need {c.bound})")
        for note in res.notes:
            rep.put(f"criterion.{n}.note", note)
    rep.put("failed", failed)
    rep.emit()
    return EXIT_ASSERT if failed else EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=_positive, default=1e-8, help="decision tolerance")
    common.add_argument("--samples", type=int, default=100, help="number of sample points")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=("text", "keyvalue"), default="keyvalue")
    common.add_argument("--out", help="write the report here instead of stdout")

    p = argparse.ArgumentParser(prog="projmetric", description="Projective structures of 2-D metrics.")
    p.add_argument("--version", action="version", version=f"projmetric {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", parents=[common], help="connection, Liouville invariants, curvature")
    a.add_argument("source", help="spec file or catalog reference like 2a:eps1=1,eps2=1")
    a.add_argument("--probes", type=int, default=4)
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("symmetry", parents=[common], help="residual of the symmetry equations")
    s.add_argument("source")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--field", help="'Z1, Z2' expressions")
    g.add_argument("--field-file", help="file with Z1 = ... and Z2 = ... lines")
    s.set_defaults(func=cmd_symmetry)

    f = sub.add_parser("flatness", parents=[common], help="projective flatness test")
    f.add_argument("source", nargs="?")
    f.add_argument("--abcd", nargs=4, type=float, metavar=("A", "B", "C", "D"))
    f.set_defaults(func=cmd_flatness)

    m = sub.add_parser("mobility", parents=[common], help="dimension of the constrained coefficient system")
    for k in "ABCD":
        m.add_argument(f"--{k}", type=float, default=0.0)
    m.add_argument("--case", type=int, choices=(1, 2, 3), default=3)
    m.add_argument("--alpha", help="comma-separated exponents, complex allowed (1j)")
    m.add_argument("--x-range", nargs=2, type=float, default=(0.5, 2.5))
    m.add_argument("--check-points", type=int, default=12)
    m.add_argument("--displayed-constraint", action="store_true",
                   help="use +k on the constraint super-diagonal")
    m.set_defaults(func=cmd_mobility)

    c = sub.add_parser("catalog", parents=[common], help="normal-form report")
    c.add_argument("entry", help="e.g. 1a:b=3,eps1=1,eps2=1")
    c.add_argument("--probe", type=float, action="append")
    c.set_defaults(func=cmd_catalog)

    d = sub.add_parser("distinguish", parents=[common], help="isometry test for two catalog entries")
    d.add_argument("a")
    d.add_argument("b")
    d.set_defaults(func=cmd_distinguish)

    q = sub.add_parser("geodesic", parents=[common], help="integrate geodesics and report integral drift")
    q.add_argument("source", nargs="?")
    q.add_argument("--suite", choices=("koenigs", "superintegrable"))
    q.add_argument("--D", type=float, default=-0.5, help="parameter of the superintegrable suite")
    q.add_argument("--state", nargs=4, type=float, metavar=("X", "Y", "VX", "VY"))
    q.add_argument("--trials", type=int, default=10)
    q.add_argument("--T", type=_positive, default=3.0)
    q.add_argument("--h", type=_positive, default=1e-3)
    q.add_argument("--drift-tol", type=_positive, default=1e-6)
    q.add_argument("--dump", help="write t x y vx vy F... rows of trajectory 0")
    q.set_defaults(func=cmd_geodesic)

    v = sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    v.add_argument("--criterion", type=int, action="append", choices=range(1, 10))
    v.set_defaults(func=cmd_verify)
    return p


INPUT_ERRORS = (
    ParseError,
    InvalidParameterError,
    DegenerateMetricError,
    DomainError,
    PreconditionError,
    UnboundParameterError,
    OSError,
    ValueError,
)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.samples <= 0:
        parser.error("--samples must be positive")
    try:
        return args.func(args)
    except (IndeterminateError, IntegrationError) as err:
        print(f"indeterminate: {err}", file=sys.stderr)
        return EXIT_INDETERMINATE
    except INPUT_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
