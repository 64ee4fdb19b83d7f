"""Two-dimensional (pseudo-)Riemannian metrics as symbolic fields.

Index convention: coordinates are numbered 0 (x) and 1 (y). Christoffel
symbols are stored as ``gamma[i][j][k] = Γ^i_{jk}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np
from scipy.stats import qmc

from .errors import DegenerateMetricError, DomainError, ParseError
from .expr import (
    ZERO,
    Expr,
    add,
    as_expr,
    compile_exprs,
    diff,
    div,
    mul,
    neg,
    simplify,
    substitute,
)
from .specfile import parse_spec, read_spec

COORDS = ("x", "y")
DET_FLOOR = 1e-9
EXCLUDE_DIST = 1e-3


class Samples(NamedTuple):
    xs: np.ndarray
    ys: np.ndarray

    def __len__(self):
        return len(self.xs)


@dataclass(frozen=True)
class Domain:
    """Sampling rectangle plus zero loci to keep away from."""

    x0: float = 0.3
    x1: float = 1.7
    y0: float = -1.0
    y1: float = 1.0
    excludes: tuple[Expr, ...] = ()

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError("empty domain rectangle")

    def contains(self, x, y):
        return (x >= self.x0) & (x <= self.x1) & (y >= self.y0) & (y <= self.y1)


def _far_from_loci(xs, ys, excludes, env):
    keep = np.ones(len(xs), bool)
    for f in excludes:
        fx, fy = diff(f, "x"), diff(f, "y")
        run = compile_exprs([f, fx, fy], env)
        for i in np.flatnonzero(keep):
            try:
                v, vx, vy = (a[0] for a in run(xs[i : i + 1], ys[i : i + 1]))
            except DomainError:
                keep[i] = False
                continue
            grad = np.hypot(vx, vy)
            if not np.isfinite(v) or abs(v) < EXCLUDE_DIST * max(grad, 1e-300):
                keep[i] = False
    return keep


def sample_points(domain: Domain, n: int = 100, env=None, seed: int = 0) -> Samples:
    """``n`` scrambled-Halton points in the rectangle, away from excluded loci."""
    sampler = qmc.Halton(d=2, scramble=True, seed=seed)
    got_x, got_y = [], []
    need = n
    for _ in range(50):
        u = sampler.random(max(2 * need, 16))
        xs = domain.x0 + (domain.x1 - domain.x0) * u[:, 0]
        ys = domain.y0 + (domain.y1 - domain.y0) * u[:, 1]
        if domain.excludes:
            keep = _far_from_loci(xs, ys, domain.excludes, env or {})
            xs, ys = xs[keep], ys[keep]
        got_x.extend(xs[:need])
        got_y.extend(ys[:need])
        need = n - len(got_x)
        if need <= 0:
            break
    if len(got_x) < n:
        raise DomainError("could not place enough sample points away from excluded loci")
    return Samples(np.array(got_x[:n]), np.array(got_y[:n]))


@dataclass(frozen=True)
class Metric2:
    """``E dx² + 2F dx dy + G dy²``."""

    E: Expr
    F: Expr
    G: Expr
    env: dict = field(default_factory=dict)
    domain: Domain = field(default_factory=Domain)
    label: str = "metric"

    def __post_init__(self):
        for k in ("E", "F", "G"):
            object.__setattr__(self, k, as_expr(getattr(self, k)))

    def __hash__(self):
        return hash((self.E, self.F, self.G, tuple(sorted(self.env.items())), self.label))

    @property
    def matrix(self):
        return ((self.E, self.F), (self.F, self.G))

    @cached_property
    def det(self) -> Expr:
        return simplify(add(mul(self.E, self.G), neg(mul(self.F, self.F))))

    @cached_property
    def inverse(self):
        d = self.det
        g11 = div(self.G, d)
        g12 = neg(div(self.F, d))
        g22 = div(self.E, d)
        return ((g11, g12), (g12, g22))

    def samples(self, n: int = 100, seed: int = 0) -> Samples:
        return sample_points(self.domain, n, self.env, seed)

    def check_nondegenerate(self, samples: Samples | None = None) -> None:
        s = samples if samples is not None else self.samples()
        try:
            (d,) = compile_exprs([self.det], self.env)(s.xs, s.ys)
        except DomainError as err:
            raise DegenerateMetricError(f"metric undefined at a sample point: {err}") from None
        bad = ~(np.abs(d) > DET_FLOOR)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise DegenerateMetricError(
                f"det g = {d[i]:.3g} at (x, y) = ({s.xs[i]:.6g}, {s.ys[i]:.6g})"
            )

    def det_sign(self, samples: Samples | None = None) -> int:
        s = samples if samples is not None else self.samples(16)
        (d,) = compile_exprs([self.det], self.env)(s.xs, s.ys)
        sg = np.sign(d)
        if not (np.all(sg == sg[0]) and sg[0] != 0):
            raise DegenerateMetricError("det g changes sign on the domain")
        return int(sg[0])

    def with_env(self, **updates) -> "Metric2":
        env = dict(self.env)
        env.update(updates)
        return Metric2(self.E, self.F, self.G, env, self.domain, self.label)

    def quadratic(self, vx, vy, xs, ys):
        """g(ξ, ξ) at points, vectorised."""
        E, F, G = compile_exprs([self.E, self.F, self.G], self.env)(xs, ys)
        return E * vx * vx + 2 * F * vx * vy + G * vy * vy


def metric_from_spec(text: str, label: str = "metric") -> Metric2:
    spec = parse_spec(text, {"E", "F", "G"})
    return _metric_from_specfile(spec, label)


def load_metric(path: str) -> Metric2:
    return _metric_from_specfile(read_spec(path, {"E", "F", "G"}), path)


def _metric_from_specfile(spec, label) -> Metric2:
    missing = {"E", "G"} - set(spec.exprs)
    if missing:
        raise ParseError(f"metric spec lacks {', '.join(sorted(missing))}")
    dom = Domain(*(spec.domain or (0.3, 1.7, -1.0, 1.0)), excludes=tuple(spec.excludes))
    return Metric2(
        spec.exprs["E"], spec.exprs.get("F", ZERO), spec.exprs["G"], dict(spec.params), dom, label
    )


@dataclass(frozen=True)
class ChristoffelField:
    g111: Expr
    g112: Expr
    g122: Expr
    g211: Expr
    g212: Expr
    g222: Expr

    @property
    def gamma(self):
        """Nested ``[i][j][k]`` view, symmetric in ``j, k``."""
        return (
            ((self.g111, self.g112), (self.g112, self.g122)),
            ((self.g211, self.g212), (self.g212, self.g222)),
        )

    def as_list(self) -> list[Expr]:
        return [self.g111, self.g112, self.g122, self.g211, self.g212, self.g222]


def christoffel(g: Metric2, check: bool = True) -> ChristoffelField:
    """Levi-Civita connection of ``g``."""
    if check:
        g.check_nondegenerate()
    return _christoffel(g)


_CHRIST_CACHE: dict = {}


def _christoffel(g: Metric2) -> ChristoffelField:
    key = (g.E, g.F, g.G)
    hit = _CHRIST_CACHE.get(key)
    if hit is not None:
        return hit
    m, inv = g.matrix, g.inverse
    dm = [[[diff(m[a][b], c) for c in COORDS] for b in range(2)] for a in range(2)]
    # Γ_{l,jk} = ½(∂_j g_lk + ∂_k g_lj − ∂_l g_jk)
    first = [
        [[mul(0.5, add(dm[l][k][j], dm[l][j][k], neg(dm[j][k][l]))) for k in range(2)] for j in range(2)]
        for l in range(2)
    ]
    comps = {}
    for i in range(2):
        for j in range(2):
            for k in range(j, 2):
                comps[(i, j, k)] = simplify(add(*(mul(inv[i][l], first[l][j][k]) for l in range(2))))
    out = ChristoffelField(
        comps[(0, 0, 0)], comps[(0, 0, 1)], comps[(0, 1, 1)],
        comps[(1, 0, 0)], comps[(1, 0, 1)], comps[(1, 1, 1)],
    )
    _CHRIST_CACHE[key] = out
    return out


def levi_civita_residual(g: Metric2, gamma: ChristoffelField, samples: Samples) -> float:
    """max |g_{ij;k}| with g_{ij;k} = ∂_k g_ij − Γ^l_{ki} g_lj − Γ^l_{kj} g_il."""
    m, G = g.matrix, gamma.gamma
    res = []
    for i in range(2):
        for j in range(i, 2):
            for k in range(2):
                terms = [diff(m[i][j], COORDS[k])]
                for l in range(2):
                    terms.append(neg(mul(G[l][k][i], m[l][j])))
                    terms.append(neg(mul(G[l][k][j], m[i][l])))
                res.append(add(*terms))
    vals = compile_exprs(res, g.env)(samples.xs, samples.ys)
    return float(max(np.max(np.abs(v)) for v in vals))


def riemann(gamma: ChristoffelField):
    """``R[i][j][k][l] = R^i_{jkl}``."""
    G = gamma.gamma

    def comp(i, j, k, l):
        terms = [diff(G[i][l][j], COORDS[k]), neg(diff(G[i][k][j], COORDS[l]))]
        for m in range(2):
            terms.append(mul(G[i][k][m], G[m][l][j]))
            terms.append(neg(mul(G[i][l][m], G[m][k][j])))
        return add(*terms)

    return [[[[comp(i, j, k, l) for l in range(2)] for k in range(2)] for j in range(2)] for i in range(2)]


def scalar_curvature(g: Metric2) -> Expr:
    """R = g^{jl} R^i_{jil}; equals 2K for a surface of Gauss curvature K."""
    g.check_nondegenerate()
    Rm = riemann(_christoffel(g))
    inv = g.inverse
    ric = [[add(*(Rm[i][j][i][l] for i in range(2))) for l in range(2)] for j in range(2)]
    return simplify(add(*(mul(inv[j][l], ric[j][l]) for j in range(2) for l in range(2))))


def grad_norm_sq(g: Metric2, f) -> Expr:
    f = as_expr(f)
    g.check_nondegenerate()
    inv = g.inverse
    df = [diff(f, c) for c in COORDS]
    return add(*(mul(inv[i][j], df[i], df[j]) for i in range(2) for j in range(2)))


def laplacian(g: Metric2, f) -> Expr:
    """Laplace-Beltrami operator with √|det g|.

    Expanded as g^ij f_ij + (∂_i g^ij) f_j + g^ij f_j ∂_i(det)/(2 det), which is
    the divergence form without the square root (the sign of det cancels).
    """
    f = as_expr(f)
    g.check_nondegenerate()
    inv, det = g.inverse, g.det
    df = [diff(f, c) for c in COORDS]
    terms = []
    for i in range(2):
        ci = COORDS[i]
        logd = div(diff(det, ci), mul(2, det))
        for j in range(2):
            terms.append(mul(inv[i][j], diff(df[j], ci)))
            terms.append(mul(diff(inv[i][j], ci), df[j]))
            terms.append(mul(inv[i][j], df[j], logd))
    return add(*terms)


@dataclass(frozen=True)
class CoordinateMap:
    """Old coordinates written in terms of new ones: (x, y) = (u(x̄, ȳ), v(x̄, ȳ)).

    The expressions use ``x``, ``y`` for the new coordinates.
    """

    u: Expr
    v: Expr

    def __post_init__(self):
        object.__setattr__(self, "u", as_expr(self.u))
        object.__setattr__(self, "v", as_expr(self.v))

    @cached_property
    def jacobian(self):
        return ((diff(self.u, "x"), diff(self.u, "y")), (diff(self.v, "x"), diff(self.v, "y")))

    def __call__(self, xs, ys, env=None):
        return compile_exprs([self.u, self.v], env)(xs, ys)


IDENTITY_MAP = CoordinateMap("x", "y")


def pullback(g: Metric2, phi: CoordinateMap, domain: Domain | None = None, samples: Samples | None = None) -> Metric2:
    """Components Jᵀ g(φ) J of the metric in the new coordinates."""
    dom = domain or g.domain
    J = phi.jacobian
    s = samples if samples is not None else sample_points(dom, 100, g.env)
    jdet = add(mul(J[0][0], J[1][1]), neg(mul(J[0][1], J[1][0])))
    (jd,) = compile_exprs([jdet], g.env)(s.xs, s.ys)
    if np.any(np.abs(jd) <= DET_FLOOR):
        i = int(np.flatnonzero(np.abs(jd) <= DET_FLOOR)[0])
        raise DegenerateMetricError(f"singular Jacobian at (x, y) = ({s.xs[i]:.6g}, {s.ys[i]:.6g})")
    sub = {"x": phi.u, "y": phi.v}
    m = [[substitute(c, sub) for c in row] for row in g.matrix]

    def comp(a, b):
        return simplify(add(*(mul(J[i][a], m[i][j], J[j][b]) for i in range(2) for j in range(2))))

    return Metric2(comp(0, 0), comp(0, 1), comp(1, 1), dict(g.env), dom, f"pullback({g.label})")


def euclidean(domain: Domain | None = None) -> Metric2:
    return Metric2(1, 0, 1, {}, domain or Domain(), "flat")


def evaluate_field(exprs: Sequence[Expr], env, samples: Samples) -> list[np.ndarray]:
    return compile_exprs(list(exprs), env)(samples.xs, samples.ys)
