"""Geodesic flow, quadratic integrals and the maps between integrals and symmetries."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, IntegrationError, PreconditionError
from .expr import (
    Expr,
    add,
    compile_exprs,
    diff,
    div,
    mul,
    neg,
    parse,
    pow_rat,
    simplify,
)
from .geometry import Domain, Metric2, Samples, christoffel, sample_points
from .liouville import QuadraticForm
from .projective import VectorField

DEFAULT_H = 1e-3
DRIFT_TOL = 1e-6
INEQUIV_TOL = 1e-3
KILLING_TOL = 1e-6


@dataclass(frozen=True)
class GeodesicState:
    x: float
    y: float
    vx: float
    vy: float

    def __post_init__(self):
        v = (self.x, self.y, self.vx, self.vy)
        if not all(np.isfinite(v)):
            raise ValueError("geodesic state must be finite")
        if self.vx == 0 and self.vy == 0:
            raise ValueError("velocity must be nonzero")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.vx, self.vy], float)


@dataclass
class Trajectory:
    """Fixed-step RK4 output for a batch of geodesics.

    ``states[k, m]`` is (x, y, vx, vy) of trajectory m at time t[k]; rows past
    ``valid[m]`` repeat the last in-domain state.
    """

    t: np.ndarray
    states: np.ndarray
    h: float
    valid: np.ndarray
    label: str = ""

    @property
    def clipped(self) -> np.ndarray:
        return self.valid < len(self.t)

    def single(self, m: int = 0) -> np.ndarray:
        return self.states[: self.valid[m], m]


def _geodesic_rhs(g: Metric2):
    gam = christoffel(g).gamma
    acc = []
    # a^i = -Γ^i_11 vx² - 2Γ^i_12 vx vy - Γ^i_22 vy²; compiled as the six symbols
    for i in range(2):
        acc += [gam[i][0][0], gam[i][0][1], gam[i][1][1]]
    fn = compile_exprs(acc, g.env)

    def rhs(s):
        x, y, vx, vy = s[:, 0], s[:, 1], s[:, 2], s[:, 3]
        c = fn(x, y)
        out = np.empty_like(s)
        out[:, 0] = vx
        out[:, 1] = vy
        q = (vx * vx, 2 * vx * vy, vy * vy)
        out[:, 2] = -(c[0] * q[0] + c[1] * q[1] + c[2] * q[2])
        out[:, 3] = -(c[3] * q[0] + c[4] * q[1] + c[5] * q[2])
        return out

    return rhs


def _safe_rhs(rhs, s):
    """rhs on rows of s; rows where the field is undefined come back as NaN."""
    try:
        return rhs(s)
    except DomainError:
        out = np.full_like(s, np.nan)
        for i in range(len(s)):
            try:
                out[i] = rhs(s[i : i + 1])[0]
            except DomainError:
                pass
        return out


def integrate_batch(g: Metric2, s0: np.ndarray, T: float, h: float = DEFAULT_H, label: str = "") -> Trajectory:
    """Classical RK4 on many initial states at once, clipping at the domain boundary."""
    s0 = np.atleast_2d(np.asarray(s0, float))
    if h <= 0 or T <= 0:
        raise ValueError("T and h must be positive")
    dom = g.domain
    if not np.all(dom.contains(s0[:, 0], s0[:, 1])):
        raise DomainError("initial point outside the domain")
    n = int(round(T / h))
    rhs = _geodesic_rhs(g)
    m = len(s0)
    states = np.empty((n + 1, m, 4))
    states[0] = s0
    valid = np.full(m, n + 1)
    alive = np.ones(m, bool)
    cur = s0.copy()
    for k in range(n):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            states[k + 1 :] = cur
            break
        s = cur[idx]
        k1 = _safe_rhs(rhs, s)
        k2 = _safe_rhs(rhs, s + 0.5 * h * k1)
        k3 = _safe_rhs(rhs, s + 0.5 * h * k2)
        k4 = _safe_rhs(rhs, s + h * k3)
        nxt = s + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        ok = np.all(np.isfinite(nxt), axis=1) & dom.contains(nxt[:, 0], nxt[:, 1])
        cur[idx[ok]] = nxt[ok]
        dead = idx[~ok]
        alive[dead] = False
        valid[dead] = k + 1
        states[k + 1] = cur
    if np.any(valid < 2):
        raise IntegrationError("a geodesic left the domain within the first step")
    return Trajectory(np.arange(n + 1) * h, states, h, valid, label)


def integrate_geodesic(g: Metric2, s0: GeodesicState | Sequence[float], T: float, h: float = DEFAULT_H) -> Trajectory:
    arr = s0.as_array() if isinstance(s0, GeodesicState) else np.asarray(s0, float)
    return integrate_batch(g, arr[None, :], T, h, g.label)


def form_values(F: QuadraticForm, tr: Trajectory, env=None) -> np.ndarray:
    """F(ξ(t)) with shape (steps, trajectories)."""
    s = tr.states
    x, y, vx, vy = (s[..., i].ravel() for i in range(4))
    return F.value(x, y, vx, vy, env).reshape(s.shape[:2])


def integral_drift(tr: Trajectory, F: QuadraticForm, env=None, per_trajectory: bool = False):
    """Max |F(ξ(t)) − F(ξ(0))| / |F(ξ(0))| over the retained segment."""
    v = form_values(F, tr, env)
    drifts = []
    for m in range(v.shape[1]):
        seg = v[: tr.valid[m], m]
        drifts.append(float(np.max(np.abs(seg - seg[0])) / (abs(seg[0]) + 1e-300)))
    drifts = np.array(drifts)
    return drifts if per_trajectory else float(np.max(drifts))


def random_states(g: Metric2, n: int, seed: int = 0, margin: float = 0.25, speed: float = 0.2) -> np.ndarray:
    """Seeded initial states well inside the domain with fixed coordinate speed."""
    rng = np.random.default_rng(seed)
    d = g.domain
    inner = Domain(
        d.x0 + margin * (d.x1 - d.x0), d.x1 - margin * (d.x1 - d.x0),
        d.y0 + margin * (d.y1 - d.y0), d.y1 - margin * (d.y1 - d.y0), d.excludes,
    )
    pts = sample_points(inner, n, g.env, seed=int(rng.integers(2**31)))
    ang = rng.uniform(0, 2 * np.pi, n)
    return np.column_stack([pts.xs, pts.ys, speed * np.cos(ang), speed * np.sin(ang)])


# ---------------------------------------------------------------------------
# quadratic integrals


@dataclass
class QuadraticIntegralSet:
    forms: list[QuadraticForm]
    labels: list[str]
    env: dict = field(default_factory=dict)

    def __iter__(self):
        return iter(zip(self.labels, self.forms))

    def __len__(self):
        return len(self.forms)


def killing_tensor_equations(g: Metric2, F: QuadraticForm) -> list[Expr]:
    """Coefficients of ξ1³, ξ1²ξ2, ξ1ξ2², ξ2³ in d/dt F along geodesics."""
    gam = christoffel(g, check=False).gamma
    f = F.matrix
    cs = ("x", "y")

    def T(i, j, k):
        terms = [diff(f[i][j], cs[k])]
        for l in range(2):
            terms.append(mul(-2, f[i][l], gam[l][j][k]))
        return add(*terms)

    coef = {0: [], 1: [], 2: [], 3: []}
    for i in range(2):
        for j in range(2):
            for k in range(2):
                coef[i + j + k].append(T(i, j, k))
    return [add(*coef[n]) for n in range(4)]


def killing_tensor_residual(g: Metric2, F: QuadraticForm, samples: Samples | None = None, env=None) -> float:
    """Relative size of dF/dt as a cubic form, max over samples."""
    s = samples if samples is not None else g.samples()
    e = dict(g.env)
    e.update(env or {})
    res = compile_exprs(killing_tensor_equations(g, F), e)(s.xs, s.ys)
    comps = compile_exprs(F.components(), e)(s.xs, s.ys)
    scale = max(float(max(np.max(np.abs(c)) for c in comps)), 1e-300)
    return float(max(np.max(np.abs(r)) for r in res)) / scale


def is_integral(g: Metric2, F: QuadraticForm, tol: float = 1e-8) -> bool:
    return killing_tensor_residual(g, F) <= tol


# ---------------------------------------------------------------------------
# projective equivalence and the derived maps


def equivalence_integral(g: Metric2, gbar: Metric2) -> QuadraticForm:
    """ḡ(ξ, ξ) (det g / det ḡ)^{2/3}: conserved for g iff ḡ is projectively equivalent."""
    w = pow_rat(div(g.det, gbar.det), 2, 3)
    return QuadraticForm(mul(w, gbar.E), mul(w, gbar.F), mul(w, gbar.G), "I")


@dataclass
class EquivalenceReport:
    equivalent: bool
    max_drift: float
    drifts: np.ndarray
    seed: int
    T: float
    h: float

    def __bool__(self):
        return self.equivalent


def projective_equivalence_check(
    g: Metric2, gbar: Metric2, trials: int = 5, T: float = 3.0, h: float = DEFAULT_H,
    seed: int = 0, tol: float = DRIFT_TOL,
) -> EquivalenceReport:
    env = dict(gbar.env)
    env.update(g.env)
    I = equivalence_integral(g, gbar)
    tr = integrate_batch(g, random_states(g, trials, seed), T, h)
    d = integral_drift(tr, I, env, per_trajectory=True)
    return EquivalenceReport(bool(np.max(d) <= tol), float(np.max(d)), d, seed, T, h)


def _require_killing(g: Metric2, K: VectorField):
    from .catalog import killing_residual

    r = killing_residual(g, K)
    if r > KILLING_TOL:
        raise PreconditionError(f"{K} is not a Killing field of {g.label} (residual {r:.3g})")


def _require_equivalent(g: Metric2, gbar: Metric2, trials: int = 3, T: float = 1.0):
    rep = projective_equivalence_check(g, gbar, trials=trials, T=T)
    if not rep.equivalent:
        raise PreconditionError(
            f"{g.label} and {gbar.label} are not projectively equivalent (drift {rep.max_drift:.3g})"
        )


def _apply(mat, vec):
    return [add(mul(mat[i][0], vec[0]), mul(mat[i][1], vec[1])) for i in range(2)]


def knebelman_map(g: Metric2, gbar: Metric2, K: VectorField, check: bool = True) -> VectorField:
    """K̄ = (det ḡ / det g)^{1/3} ḡ⁻¹ g K, a Killing field of ḡ."""
    if check:
        _require_killing(g, K)
        _require_equivalent(g, gbar)
    gk = _apply(g.matrix, K.components)
    w = pow_rat(div(gbar.det, g.det), 1, 3)
    inv = gbar.inverse
    kb = _apply(inv, gk)
    return VectorField(simplify(mul(w, kb[0])), simplify(mul(w, kb[1])))


def _adjugate(F: QuadraticForm):
    return ((F.a22, neg(F.a12)), (neg(F.a12), F.a11))


def zf_map(g: Metric2, K: VectorField, F: QuadraticForm, check: bool = True, tol: float = 1e-8) -> VectorField:
    """Z_F = (det f / det g) f⁻¹ g K, written with the adjugate so it is linear in F."""
    if check:
        _require_killing(g, K)
        r = killing_tensor_residual(g, F)
        if r > tol:
            raise PreconditionError(f"F is not a quadratic integral of {g.label} (residual {r:.3g})")
    gk = _apply(g.matrix, K.components)
    z = _apply(_adjugate(F), gk)
    return VectorField(simplify(div(z[0], g.det)), simplify(div(z[1], g.det)))


def transfer_integral(g: Metric2, gbar: Metric2, h: QuadraticForm, check: bool = True, tol: float = 1e-8) -> QuadraticForm:
    """h ↦ (det ḡ / det g)^{2/3} h, an integral of ḡ whenever h is one of g."""
    if check:
        r = killing_tensor_residual(g, h)
        if r > tol:
            raise PreconditionError(f"h is not a quadratic integral of {g.label} (residual {r:.3g})")
        _require_equivalent(g, gbar)
    w = pow_rat(div(gbar.det, g.det), 2, 3)
    out = h.scaled(w)
    return QuadraticForm(out.a11, out.a12, out.a22, f"transfer({h.label})")


def metric_form(g: Metric2) -> QuadraticForm:
    return QuadraticForm(g.E, g.F, g.G, "g")


def killing_square(g: Metric2, K: VectorField) -> QuadraticForm:
    """F_K = (g(K, ·))²."""
    w = _apply(g.matrix, K.components)
    return QuadraticForm(mul(w[0], w[0]), mul(w[0], w[1]), mul(w[1], w[1]), "F_K")


# ---------------------------------------------------------------------------
# superintegrable examples


def metric_13(D: float, domain: Domain | None = None) -> Metric2:
    if D == 0:
        raise PreconditionError("D must be nonzero")
    return Metric2(parse("exp(3*x)"), parse("0"), parse("-2*D*exp(x)"), {"D": float(D)}, domain or Domain(), f"exp-metric(D={D:g})")


def superintegrable_suite(D: float, variant: str = "verified") -> tuple[Metric2, QuadraticIntegralSet]:
    """Metric e^{3x}dx² − 2De^x dy² with four independent quadratic integrals.

    ``dxdy`` in a form means the coefficient of ξ1 ξ2 (so f12 is half of it).
    ``variant="displayed"`` returns the textbook F2, F3 which are not integrals.
    """
    g = metric_13(D)
    H = QuadraticForm(parse("exp(3*x)/2"), parse("0"), parse("-D*exp(x)"), "H")
    F1 = QuadraticForm(parse("0"), parse("0"), parse("exp(2*x)"), "F1")
    if variant == "verified":
        F2 = QuadraticForm(parse("y*exp(3*x)/2"), parse("-exp(3*x)/2"), parse("-D*y*exp(x)"), "F2")
        # F3 = y F2 − e^{3x}(y dxdy − 2 dy²)
        F3 = QuadraticForm(parse("y^2*exp(3*x)/2"), parse("-y*exp(3*x)"), parse("-D*y^2*exp(x) + 2*exp(3*x)"), "F3")
    elif variant == "displayed":
        F2 = QuadraticForm(parse("y*exp(3*x)/2"), parse("exp(3*x)/2"), parse("-D*y*exp(x)"), "F2")
        F3 = QuadraticForm(
            parse("y^2*exp(3*x)/2"), parse("y*exp(3*x)/2 + y*exp(3*x)"),
            parse("-D*y^2*exp(x) + 8*D^2*exp(3*x)"), "F3",
        )
    else:
        raise ValueError("variant must be 'verified' or 'displayed'")
    return g, QuadraticIntegralSet([H, F1, F2, F3], ["H", "F1", "F2", "F3"], {"D": float(D)})


def koenigs_metric(domain: Domain | None = None) -> Metric2:
    P = parse("4*x^2+y^2+1")
    return Metric2(P, parse("0"), P, {}, domain or Domain(), "koenigs")


def koenigs_suite() -> tuple[Metric2, QuadraticIntegralSet]:
    g = koenigs_metric()
    F0 = QuadraticForm(parse("4*x^2+y^2+1"), parse("0"), parse("4*x^2+y^2+1"), "F0")
    F1 = QuadraticForm(parse("(4*x^2+y^2+1)*y^2"), parse("0"), parse("-(4*x^2+y^2+1)*(4*x^2+1)"), "F1")
    F2 = QuadraticForm(
        parse("(4*x^2+y^2+1)*x*y^2"), parse("-(4*x^2+y^2+1)^2*y/2"),
        parse("(4*x^2+y^2+1)*x*y^2 + (4*x^2+y^2+1)^2*x"), "F2",
    )
    return g, QuadraticIntegralSet([F0, F1, F2], ["F0", "F1", "F2"], {})


def evaluation_rank(forms: Sequence[QuadraticForm], env=None, n: int = 10, seed: int = 0, domain: Domain | None = None) -> int:
    """Rank of the n×len(forms) matrix of form values at random jets (x, y, ξ)."""
    dom = domain or Domain()
    rng = np.random.default_rng(seed)
    xs = rng.uniform(dom.x0, dom.x1, n)
    ys = rng.uniform(dom.y0, dom.y1, n)
    vx, vy = rng.normal(size=n), rng.normal(size=n)
    M = np.column_stack([F.value(xs, ys, vx, vy, env) for F in forms])
    M = M / np.linalg.norm(M, axis=0)
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > 1e-9 * s[0]))


def eliminate_time(tr: Trajectory, m: int = 0):
    """(x, y, y', y'') along trajectory m with y' = vy/vx, y'' = d(y')/dx."""
    s = tr.single(m)
    x, y, vx, vy = s.T
    yp = vy / vx
    dyp = np.gradient(yp, tr.t[: len(yp)], edge_order=2)
    ypp = dyp / vx
    return x, y, yp, ypp
