"""Normal forms of metrics whose projective symmetry pseudo-group is transitive.

Ids ``1a``, ``1b``, ``1c`` have a two-dimensional projective algebra; ``2a``,
``2b``, ``2c`` a three-dimensional one (sl(2, R)). All admit ∂/∂y as a
Killing field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
from scipy.optimize import least_squares

from .errors import DomainError, IndeterminateError, InvalidParameterError
from .expr import Expr, compile_exprs, diff, parse
from .geometry import Domain, Metric2, Samples, grad_norm_sq, laplacian, sample_points, scalar_curvature
from .projective import VectorField, field_

DEFAULT_PROBES = (0.3, 0.7, 1.1, 1.6)
DEFAULT_RECT = (0.3, 1.7, -1.0, 1.0)


@dataclass(frozen=True)
class NormalForm:
    id: str
    params: tuple[str, ...]
    E: str
    G: str
    excludes: tuple[str, ...]
    sym_dim: int
    check: Callable[[Mapping[str, float]], None]


def _eps(p, *names):
    for n in names:
        if p[n] not in (-1, 1):
            raise InvalidParameterError(f"{n} ∈ {{-1, 1}} violated ({n} = {p[n]:g})")


def _b(p):
    if p["b"] in (-2, 0, 1):
        raise InvalidParameterError(f"b ∉ {{−2, 0, 1}} violated (b = {p['b']:g})")


def _a_nonzero(p):
    if p["a"] == 0:
        raise InvalidParameterError("a ≠ 0 violated")


def _check_1a(p):
    _b(p)
    _eps(p, "eps1", "eps2")


def _check_1b(p):
    _a_nonzero(p)
    _b(p)
    _eps(p, "eps1", "eps2")


def _check_1c(p):
    _a_nonzero(p)
    _eps(p, "eps")


def _check_2a(p):
    _eps(p, "eps1", "eps2")


def _check_2b(p):
    _a_nonzero(p)
    _eps(p, "eps1", "eps2")


def _check_2c(p):
    if not p["a"] > 0:
        raise InvalidParameterError(f"a > 0 violated (a = {p['a']:g})")
    _eps(p, "eps1", "eps2")


NORMAL_FORMS: dict[str, NormalForm] = {
    "1a": NormalForm("1a", ("b", "eps1", "eps2"), "eps1*exp((b+2)*x)", "eps2*exp(b*x)", (), 2, _check_1a),
    "1b": NormalForm(
        "1b", ("a", "b", "eps1", "eps2"),
        "a*exp((b+2)*x)/(exp(b*x)+eps2)^2", "a*eps1*exp(b*x)/(exp(b*x)+eps2)",
        ("exp(b*x)+eps2",), 2, _check_1b,
    ),
    "1c": NormalForm("1c", ("a", "eps"), "a*exp(2*x)/x^2", "a*eps/x", ("x",), 2, _check_1c),
    "2a": NormalForm("2a", ("eps1", "eps2"), "eps1*exp(3*x)", "eps2*exp(x)", (), 3, _check_2a),
    "2b": NormalForm(
        "2b", ("a", "eps1", "eps2"),
        "a*exp(3*x)/(exp(x)+eps2)^2", "a*eps1*exp(x)/(exp(x)+eps2)",
        ("exp(x)+eps2",), 3, _check_2b,
    ),
    "2c": NormalForm(
        "2c", ("a", "c", "eps1", "eps2"),
        "a/((c*x+2*x^2+eps2)^2*x)", "a*eps1*x/(c*x+2*x^2+eps2)",
        ("x", "c*x+2*x^2+eps2"), 3, _check_2c,
    ),
}

IDS = tuple(NORMAL_FORMS)


def validate(id: str, params: Mapping[str, float]) -> dict[str, float]:
    if id not in NORMAL_FORMS:
        raise InvalidParameterError(f"unknown normal form {id!r}; expected one of {', '.join(IDS)}")
    nf = NORMAL_FORMS[id]
    missing = [n for n in nf.params if n not in params]
    extra = [n for n in params if n not in nf.params]
    if missing:
        raise InvalidParameterError(f"{id} needs parameters {', '.join(missing)}")
    if extra:
        raise InvalidParameterError(f"{id} does not take parameters {', '.join(extra)}")
    p = {k: float(params[k]) for k in nf.params}
    nf.check(p)
    return p


def instantiate(id: str, params: Mapping[str, float], rect=DEFAULT_RECT) -> Metric2:
    p = validate(id, params)
    nf = NORMAL_FORMS[id]
    dom = Domain(*rect, excludes=tuple(parse(e) for e in nf.excludes))
    label = f"{id}(" + ", ".join(f"{k}={p[k]:g}" for k in nf.params) + ")"
    return Metric2(parse(nf.E), parse("0"), parse(nf.G), p, dom, label)


def killing_field(id: str | None = None) -> VectorField:
    """∂/∂y; every normal form is y-independent."""
    return field_(0, 1)


def killing_residual(g: Metric2, K: VectorField, samples: Samples | None = None) -> float:
    """max over samples of |(L_K g)_ij|, (L_K g)_ij = K^k ∂_k g_ij + g_kj ∂_i K^k + g_ik ∂_j K^k."""
    s = samples if samples is not None else g.samples()
    return float(max(np.max(np.abs(v)) for v in _lie_g(g, K, s)))


def _lie_g(g: Metric2, K: VectorField, s: Samples):
    m = g.matrix
    Ks = K.components
    cs = ("x", "y")
    out = []
    for i, j in ((0, 0), (0, 1), (1, 1)):
        terms = [Ks[k] * diff(m[i][j], cs[k]) for k in range(2)]
        terms += [m[k][j] * diff(Ks[k], cs[i]) for k in range(2)]
        terms += [m[i][k] * diff(Ks[k], cs[j]) for k in range(2)]
        e = terms[0]
        for t in terms[1:]:
            e = e + t
        out.append(e)
    return compile_exprs(out, g.env)(s.xs, s.ys)


def killing_class(id: str, params: Mapping[str, float]) -> str | None:
    """Conjugacy type of ∂/∂y inside sl(2, R) for the dim-3 forms."""
    if id in ("2a", "2b"):
        return "X"
    if id == "2c":
        return "Y" if params["eps1"] * params["eps2"] == -1 else "Z"
    return None


def projective_fields(id: str, params: Mapping[str, float]) -> list[VectorField]:
    """A basis of the projective algebra, in the normal-form coordinates."""
    p = validate(id, params)
    if id == "2c":
        if p["eps1"] * p["eps2"] == 1:
            return [field_(0, 1), field_(parse("x*sin(y)"), parse("cos(y)")), field_(parse("x*cos(y)"), parse("-sin(y)"))]
        return [field_(0, 1), field_(parse("x*exp(-y)"), parse("exp(-y)")), field_(parse("-x*exp(y)"), parse("exp(y)"))]
    fields = [field_(0, 1), field_(1, "y")]
    if id in ("2a", "2b"):
        fields.append(field_(parse("2*y"), parse("1+y^2")))
    return fields


# ---------------------------------------------------------------------------
# fingerprints


@dataclass(frozen=True)
class Fingerprint:
    R: Expr
    I: Expr
    dR: Expr
    probes: tuple[float, ...]
    values: np.ndarray  # rows (R, I, ΔR) at probes, y = 0
    at_zero: tuple[float, float] | None = None  # (R₀, ΔR₀) for 2c


_FP_CACHE: dict = {}


def fingerprint_exprs(g: Metric2):
    key = (g.E, g.F, g.G)
    hit = _FP_CACHE.get(key)
    if hit is None:
        R = scalar_curvature(g)
        hit = _FP_CACHE[key] = (R, grad_norm_sq(g, R), laplacian(g, R))
    return hit


def _extrapolate_to_zero(fn, env, scale: float = 0.2) -> tuple[float, ...]:
    """Values at x = 0 by polynomial extrapolation from both sides of the locus."""
    xs = np.concatenate([-np.linspace(0.02, scale, 10)[::-1], np.linspace(0.02, scale, 10)])
    ok_x, rows = [], []
    for x in xs:
        try:
            v = fn(np.array([x]), np.array([0.0]))
        except DomainError:
            continue
        v = np.array([a[0] for a in v])
        if np.all(np.isfinite(v)):
            ok_x.append(x)
            rows.append(v)
    if len(ok_x) < 12:
        raise IndeterminateError("too few regular points near x = 0 for extrapolation")
    ok_x = np.array(ok_x)
    rows = np.array(rows)
    deg = min(10, len(ok_x) - 2)
    out = []
    for col in rows.T:
        poly = np.polynomial.Polynomial.fit(ok_x, col, deg)
        out.append(float(poly(0.0)))
    return tuple(out)


def fingerprint(id: str, params: Mapping[str, float], probes=DEFAULT_PROBES) -> Fingerprint:
    g = instantiate(id, params)
    R, I, dR = fingerprint_exprs(g)
    xs = np.asarray(probes, float)
    f = compile_exprs([R, I, dR], g.env)
    try:
        vals = np.array(f(xs, np.zeros_like(xs)))
    except DomainError as err:
        raise DomainError(f"probe outside the domain of {g.label}: {err}") from None
    at_zero = None
    if id == "2c":
        r0, dr0 = _extrapolate_to_zero(compile_exprs([R, dR], g.env), g.env)
        at_zero = (r0, dr0)
    return Fingerprint(R, I, dR, tuple(xs), vals, at_zero)


# ---------------------------------------------------------------------------
# distinguishing


@dataclass(frozen=True)
class Verdict:
    kind: str  # distinct | identical | same-family
    witness: str = ""
    detail: str = ""

    def __str__(self):
        if self.kind == "distinct":
            return f"distinct: {self.witness}"
        return self.kind if not self.detail else f"{self.kind}: {self.detail}"


MATCH_TOL = 1e-8
NOMATCH_TOL = 1e-4
_FIT_X = np.linspace(0.35, 1.6, 14)


def _same_params(pa, pb) -> bool:
    return set(pa) == set(pb) and all(abs(pa[k] - pb[k]) <= 1e-12 * max(1.0, abs(pa[k])) for k in pa)


def _r_function(id, params):
    g = instantiate(id, params)
    R, _, _ = fingerprint_exprs(g)
    f = compile_exprs([R], g.env)

    def r(xs):
        xs = np.asarray(xs, float)
        return f(xs, np.zeros_like(xs))[0]

    return r


def _ratio_values(id, params, xs):
    g = instantiate(id, params)
    R, I, _ = fingerprint_exprs(g)
    r, i = compile_exprs([R, I], g.env)(xs, np.zeros_like(xs))
    return i / (9 * r**3)


def _translation_residual(ra, rb, x0: float) -> float:
    try:
        a = ra(_FIT_X + x0)
    except DomainError:
        return math.inf
    b = rb(_FIT_X)
    if not np.all(np.isfinite(a)):
        return math.inf
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def translation_fit(ra, rb, span: float = 2.0) -> tuple[float, float]:
    """Best x0 with R_A(x + x0) ≈ R_B(x); returns (x0, relative residual)."""
    grid = np.linspace(-span, span, 801)
    res = np.array([_translation_residual(ra, rb, x0) for x0 in grid])
    finite = np.isfinite(res)
    if not np.any(finite):
        return math.nan, math.inf
    best_x0, best = math.nan, math.inf
    order = np.argsort(np.where(finite, res, np.inf))[:5]
    b = rb(_FIT_X)
    scale = max(np.linalg.norm(b), 1e-300)
    for i in order:
        x_start = grid[i]

        def resid(v):
            try:
                a = ra(_FIT_X + v[0])
            except DomainError:
                return np.full_like(b, 1e6)
            return (a - b) / scale

        try:
            sol = least_squares(resid, [x_start], xtol=1e-15, ftol=1e-15, gtol=1e-15)
            cand = _translation_residual(ra, rb, float(sol.x[0]))
            x_c = float(sol.x[0])
        except (ValueError, FloatingPointError):
            cand, x_c = res[i], x_start
        if cand < best:
            best, best_x0 = cand, x_c
    return best_x0, best


def _signs(id, params):
    g = instantiate(id, params)
    s = sample_points(g.domain, 4, g.env)
    (d, G) = compile_exprs([g.det, g.G], g.env)(s.xs, s.ys)
    return int(np.sign(d[0])), int(np.sign(G[0]))


def distinguish(id_a: str, pa: Mapping[str, float], id_b: str, pb: Mapping[str, float]) -> Verdict:
    """Decide whether two catalog entries are isometric, naming the invariant that separates them."""
    pa, pb = validate(id_a, pa), validate(id_b, pb)
    if id_a == id_b and _same_params(pa, pb):
        return Verdict("identical")
    na, nb = NORMAL_FORMS[id_a], NORMAL_FORMS[id_b]
    if na.sym_dim != nb.sym_dim:
        return Verdict("distinct", "dim p", f"{na.sym_dim} vs {nb.sym_dim}")
    ka, kb = killing_class(id_a, pa), killing_class(id_b, pb)
    if ka != kb:
        return Verdict("distinct", "Killing class", f"{ka} vs {kb}")

    if {id_a, id_b} <= {"2a", "2b"}:
        xs = _FIT_X
        qa, qb = _ratio_values(id_a, pa, xs), _ratio_values(id_b, pb, xs)
        ca = np.ptp(qa) <= MATCH_TOL * max(1.0, np.max(np.abs(qa)))
        cb = np.ptp(qb) <= MATCH_TOL * max(1.0, np.max(np.abs(qb)))
        if ca != cb or (ca and cb and abs(qa[0] - qb[0]) > MATCH_TOL * max(1.0, abs(qa[0]))):
            return Verdict("distinct", "I/(9R^3)", f"{qa[0]:.6g} vs {qb[0]:.6g} at x={xs[0]:g}")

    if id_a == "2c" and id_b == "2c":
        za = fingerprint("2c", pa, (0.5,)).at_zero
        zb = fingerprint("2c", pb, (0.5,)).at_zero
        if abs(za[0] - zb[0]) > MATCH_TOL * max(1.0, abs(za[0])):
            return Verdict("distinct", "R at x=0", f"{za[0]:.10g} vs {zb[0]:.10g}")
        if abs(za[1] - zb[1]) > MATCH_TOL * max(1.0, abs(za[1])):
            return Verdict("distinct", "ΔR at x=0", f"{za[1]:.10g} vs {zb[1]:.10g}")
    else:
        x0, res = translation_fit(_r_function(id_a, pa), _r_function(id_b, pb))
        if res > NOMATCH_TOL:
            return Verdict("distinct", "R(x) up to translation", f"best residual {res:.3g}")
        if res > MATCH_TOL:
            raise IndeterminateError(
                f"R translation fit inconclusive: residual {res:.3g} at x0 = {x0:.6g}"
            )

    sa, sb = _signs(id_a, pa), _signs(id_b, pb)
    if sa[0] != sb[0]:
        return Verdict("distinct", "signature", f"sign det g {sa[0]:+d} vs {sb[0]:+d}")
    if sa[1] != sb[1]:
        return Verdict("distinct", "Killing length sign", f"g(K,K) sign {sa[1]:+d} vs {sb[1]:+d}")
    return Verdict("same-family", "", "no invariant separates the entries")
