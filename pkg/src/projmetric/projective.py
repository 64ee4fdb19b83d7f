"""Projective connections y'' = K0 + K1 y' + K2 y'^2 + K3 y'^3 and their symmetries.

Prolongation layout. A projective vector field Z = (Z1, Z2) is determined by
the 8-vector of jets

    Ẑ = (Z1, Z2, Z1_x, Z2_x, Z1_y, Z2_y, Z1_xy, Z2_xy)

and along any symmetry dẐ = Ẑ (X dx + Y dy) with Ẑ a row vector. The
integrability condition is ẐL = 0 with L = Y_x − X_y + [X, Y].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ParseError
from .expr import ZERO, Expr, add, as_expr, compile_exprs, diff, mul, neg, simplify
from .geometry import (
    COORDS,
    ChristoffelField,
    Domain,
    Metric2,
    Samples,
    christoffel,
    sample_points,
)
from .specfile import parse_spec, read_spec

ZERO_TOL = 1e-9
FD_TOL = 1e-6


@dataclass(frozen=True)
class ProjectiveConnection:
    K0: Expr
    K1: Expr
    K2: Expr
    K3: Expr
    env: dict = field(default_factory=dict)
    domain: Domain = field(default_factory=Domain)
    label: str = "connection"

    def __post_init__(self):
        for k in ("K0", "K1", "K2", "K3"):
            object.__setattr__(self, k, as_expr(getattr(self, k)))

    def __hash__(self):
        return hash((self.K0, self.K1, self.K2, self.K3, tuple(sorted(self.env.items()))))

    @property
    def K(self) -> tuple[Expr, Expr, Expr, Expr]:
        return (self.K0, self.K1, self.K2, self.K3)

    def samples(self, n: int = 100, seed: int = 0) -> Samples:
        return sample_points(self.domain, n, self.env, seed)

    def evaluate(self, samples: Samples) -> list[np.ndarray]:
        return compile_exprs(list(self.K), self.env)(samples.xs, samples.ys)


@dataclass(frozen=True)
class VectorField:
    Z1: Expr
    Z2: Expr

    def __post_init__(self):
        object.__setattr__(self, "Z1", as_expr(self.Z1))
        object.__setattr__(self, "Z2", as_expr(self.Z2))

    @property
    def components(self) -> tuple[Expr, Expr]:
        return (self.Z1, self.Z2)

    def __str__(self):
        return f"({self.Z1}, {self.Z2})"


def field_(z1, z2) -> VectorField:
    return VectorField(as_expr(z1), as_expr(z2))


class LiouvilleInvariant(NamedTuple):
    L1: Expr
    L2: Expr


class Residual(NamedTuple):
    max_abs: float
    per_equation: tuple[float, ...]

    def __float__(self):
        return self.max_abs


def projective_connection(gamma: ChristoffelField, env=None, domain=None, label="connection") -> ProjectiveConnection:
    """Geodesics of Γ as unparametrised curves (x, y(x))."""
    K0 = simplify(neg(gamma.g211))
    K1 = simplify(add(gamma.g111, mul(-2, gamma.g212)))
    K2 = simplify(neg(add(gamma.g222, mul(-2, gamma.g112))))
    K3 = simplify(gamma.g122)
    return ProjectiveConnection(K0, K1, K2, K3, dict(env or {}), domain or Domain(), label)


def connection_of(g: Metric2) -> ProjectiveConnection:
    return projective_connection(christoffel(g), g.env, g.domain, f"pc({g.label})")


def connection_from_spec(text: str, label: str = "connection") -> ProjectiveConnection:
    return _pc_from_specfile(parse_spec(text, {"K0", "K1", "K2", "K3"}), label)


def load_connection(path: str) -> ProjectiveConnection:
    return _pc_from_specfile(read_spec(path, {"K0", "K1", "K2", "K3"}), path)


def _pc_from_specfile(spec, label):
    missing = {"K0", "K1", "K2", "K3"} - set(spec.exprs)
    if missing:
        raise ParseError(f"connection spec lacks {', '.join(sorted(missing))}")
    dom = Domain(*(spec.domain or (0.3, 1.7, -1.0, 1.0)), excludes=tuple(spec.excludes))
    return ProjectiveConnection(*(spec.exprs[k] for k in ("K0", "K1", "K2", "K3")), dict(spec.params), dom, label)


def abcd_connection(A: float, B: float, C: float, D: float, domain=None) -> ProjectiveConnection:
    """y'' = A e^x + B y' + C e^{-x} y'^2 + D e^{-2x} y'^3 with numeric constants."""
    from .expr import exp, X

    return ProjectiveConnection(
        mul(A, exp(X)), as_expr(float(B)), mul(C, exp(neg(X))), mul(D, exp(mul(-2, X))),
        {}, domain or Domain(), f"abcd({A:g},{B:g},{C:g},{D:g})",
    )


# ---------------------------------------------------------------------------
# symmetry system


def _d(e, *cs):
    for c in cs:
        e = diff(e, c)
    return e


def ptr_equations(pc: ProjectiveConnection, Z: VectorField) -> list[Expr]:
    """Left-hand sides of the four linear PDEs characterising symmetries."""
    K0, K1, K2, K3 = pc.K
    Z1, Z2 = Z.components
    x, y = "x", "y"
    return [
        add(_d(Z2, x, x), mul(-2, K0, _d(Z1, x)), neg(mul(K1, _d(Z2, x))), mul(K0, _d(Z2, y)),
            neg(mul(_d(K0, x), Z1)), neg(mul(_d(K0, y), Z2))),
        add(neg(_d(Z1, x, x)), mul(2, _d(Z2, x, y)), neg(mul(K1, _d(Z1, x))), mul(-3, K0, _d(Z1, y)),
            mul(-2, K2, _d(Z2, x)), neg(mul(_d(K1, x), Z1)), neg(mul(_d(K1, y), Z2))),
        add(mul(-2, _d(Z1, x, y)), _d(Z2, y, y), mul(-2, K1, _d(Z1, y)), mul(-3, K3, _d(Z2, x)),
            neg(mul(K2, _d(Z2, y))), neg(mul(_d(K2, x), Z1)), neg(mul(_d(K2, y), Z2))),
        add(neg(_d(Z1, y, y)), mul(K3, _d(Z1, x)), neg(mul(K2, _d(Z1, y))), mul(-2, K3, _d(Z2, y)),
            neg(mul(_d(K3, x), Z1)), neg(mul(_d(K3, y), Z2))),
    ]


def _residual(exprs, env, samples: Samples) -> Residual:
    vals = compile_exprs(exprs, env)(samples.xs, samples.ys)
    per = tuple(float(np.max(np.abs(v))) for v in vals)
    return Residual(max(per), per)


def symmetry_residual(pc: ProjectiveConnection, Z: VectorField, samples: Samples | None = None, env=None) -> Residual:
    """Max |lhs| of the symmetry system over the samples."""
    s = samples if samples is not None else pc.samples()
    e = dict(pc.env)
    e.update(env or {})
    return _residual(ptr_equations(pc, Z), e, s)


def liouville_invariants(pc: ProjectiveConnection) -> LiouvilleInvariant:
    K0, K1, K2, K3 = pc.K
    x, y = "x", "y"
    L1 = add(
        mul(2, _d(K1, x, y)), neg(_d(K2, x, x)), mul(-3, _d(K0, y, y)),
        mul(-6, K0, _d(K3, x)), mul(-3, K3, _d(K0, x)), mul(3, K0, _d(K2, y)),
        mul(3, K2, _d(K0, y)), mul(K1, _d(K2, x)), mul(-2, K1, _d(K1, y)),
    )
    L2 = add(
        mul(2, _d(K2, x, y)), neg(_d(K1, y, y)), mul(-3, _d(K3, x, x)),
        mul(6, K3, _d(K0, y)), mul(3, K0, _d(K3, y)), mul(-3, K3, _d(K1, x)),
        mul(-3, K1, _d(K3, x)), neg(mul(K2, _d(K1, y))), mul(2, K2, _d(K2, x)),
    )
    return LiouvilleInvariant(L1, L2)


def liouville_values(pc: ProjectiveConnection, samples: Samples) -> tuple[np.ndarray, np.ndarray]:
    L = liouville_invariants(pc)
    a, b = compile_exprs([L.L1, L.L2], pc.env)(samples.xs, samples.ys)
    return a, b


def is_flat(pc: ProjectiveConnection, samples: Samples | None = None, tol: float = ZERO_TOL) -> bool:
    s = samples if samples is not None else pc.samples()
    a, b = liouville_values(pc, s)
    return bool(np.all(np.maximum(np.abs(a), np.abs(b)) <= tol))


def abcd_flatness_pair(A, B, C, D) -> tuple[float, float]:
    """Flatness conditions of the ABCD form, read off L1 e^x and L2 e^{2x}/2.

    Both vanish iff the connection is flat.
    """
    return (6 * D * (B - 2) - 2 * C * C, 9 * A * D - B * C - C)


def lie_derivative_lambda(pc: ProjectiveConnection, Z: VectorField) -> tuple[Expr, Expr]:
    """Components of L_Z λ for λ = (L1 dx + L2 dy) ⊗ (dx ∧ dy)."""
    L = liouville_invariants(pc)
    Ls = (L.L1, L.L2)
    Zs = Z.components
    div_z = add(diff(Zs[0], "x"), diff(Zs[1], "y"))
    out = []
    for i in range(2):
        ci = COORDS[i]
        terms = [mul(Zs[k], diff(Ls[i], COORDS[k])) for k in range(2)]
        terms += [mul(Ls[k], diff(Zs[k], ci)) for k in range(2)]
        terms.append(mul(Ls[i], div_z))
        out.append(add(*terms))
    return out[0], out[1]


# ---------------------------------------------------------------------------
# prolongation

JET_ORDER = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0), (0, 0, 1), (1, 0, 1), (0, 1, 1), (1, 1, 1)]
_UNKNOWN = [(0, 2, 0), (1, 2, 0), (0, 0, 2), (1, 0, 2)] + [
    (a, i, 3 - i) for a in range(2) for i in range(4)
]


def _ptr_linear_forms(pc: ProjectiveConnection) -> list[dict]:
    """ptr as linear forms {(component, #x, #y): coefficient Expr}."""
    K0, K1, K2, K3 = pc.K
    dx = lambda e: diff(e, "x")
    dy = lambda e: diff(e, "y")
    one = as_expr(1)
    return [
        {(1, 2, 0): one, (0, 1, 0): mul(-2, K0), (1, 1, 0): neg(K1), (1, 0, 1): K0,
         (0, 0, 0): neg(dx(K0)), (1, 0, 0): neg(dy(K0))},
        {(0, 2, 0): as_expr(-1), (1, 1, 1): as_expr(2), (0, 1, 0): neg(K1), (0, 0, 1): mul(-3, K0),
         (1, 1, 0): mul(-2, K2), (0, 0, 0): neg(dx(K1)), (1, 0, 0): neg(dy(K1))},
        {(0, 1, 1): as_expr(-2), (1, 0, 2): one, (0, 0, 1): mul(-2, K1), (1, 1, 0): mul(-3, K3),
         (1, 0, 1): neg(K2), (0, 0, 0): neg(dx(K2)), (1, 0, 0): neg(dy(K2))},
        {(0, 0, 2): as_expr(-1), (0, 1, 0): K3, (0, 0, 1): neg(K2), (1, 0, 1): mul(-2, K3),
         (0, 0, 0): neg(dx(K3)), (1, 0, 0): neg(dy(K3))},
    ]


def _total_derivative(form: dict, coord: str) -> dict:
    out: dict = {}
    for (a, i, j), c in form.items():
        dc = diff(c, coord)
        if dc != ZERO:
            out[(a, i, j)] = add(out.get((a, i, j), ZERO), dc)
        shifted = (a, i + 1, j) if coord == "x" else (a, i, j + 1)
        out[shifted] = add(out.get(shifted, ZERO), c)
    return out


class _Prolongation:
    """Compiled coefficient tables for the 12×12 jet system of one connection."""

    def __init__(self, pc: ProjectiveConnection):
        base = _ptr_linear_forms(pc)
        forms = base + [_total_derivative(f, c) for f in base for c in ("x", "y")]
        self.vars = _UNKNOWN + JET_ORDER
        index = {v: n for n, v in enumerate(self.vars)}
        entries, slots = [], []
        for r, f in enumerate(forms):
            for v, c in f.items():
                if v not in index:
                    raise AssertionError(f"jet {v} outside the prolongation")
                entries.append(c)
                slots.append((r, index[v]))
        self.slots = slots
        self.nrows = len(forms)
        self.fn = compile_exprs(entries, pc.env)

    def matrices(self, xs: np.ndarray, ys: np.ndarray):
        vals = self.fn(np.asarray(xs, float), np.asarray(ys, float))
        n = len(np.atleast_1d(xs))
        M = np.zeros((n, self.nrows, len(self.vars)))
        for (r, c), v in zip(self.slots, vals):
            M[:, r, c] += v
        return M

    def XY(self, xs, ys):
        """X, Y stacked over points: shape (n, 8, 8)."""
        M = self.matrices(xs, ys)
        nu = len(_UNKNOWN)
        A_u, A_k = M[:, :, :nu], M[:, :, nu:]
        sol = -np.linalg.solve(A_u, A_k)  # unknown jets as columns over Ẑ
        lookup = {v: ("u", n) for n, v in enumerate(_UNKNOWN)}
        lookup.update({v: ("k", n) for n, v in enumerate(JET_ORDER)})

        def express(var):
            kind, n = lookup[var]
            if kind == "k":
                e = np.zeros((M.shape[0], 8))
                e[:, n] = 1.0
                return e
            return sol[:, n, :]

        X = np.zeros((M.shape[0], 8, 8))
        Y = np.zeros_like(X)
        for col, (a, i, j) in enumerate(JET_ORDER):
            X[:, :, col] = express((a, i + 1, j))
            Y[:, :, col] = express((a, i, j + 1))
        return X, Y


_PROLONG_CACHE: dict = {}


def _prolongation(pc: ProjectiveConnection) -> _Prolongation:
    key = hash(pc)
    hit = _PROLONG_CACHE.get(key)
    if hit is None or hit[0] != pc:
        hit = _PROLONG_CACHE[key] = (pc, _Prolongation(pc))
    return hit[1]


@dataclass(frozen=True)
class SymmetryConnectionSample:
    point: tuple[float, float]
    X: np.ndarray
    Y: np.ndarray
    L: np.ndarray

    @property
    def curvature_norm(self) -> float:
        return float(np.linalg.norm(self.L))

    def curvature_rank(self, rel: float = 1e-7) -> int:
        s = np.linalg.svd(self.L, compute_uv=False)
        return int(np.sum(s > rel * max(1.0, np.max(np.abs(self.X)), np.max(np.abs(self.Y)))))


def prolonged_connection_at(pc: ProjectiveConnection, p, h: float = 1e-4) -> SymmetryConnectionSample:
    """X(p), Y(p) and the curvature L(p) (derivatives by central differences)."""
    pro = _prolongation(pc)
    x, y = float(p[0]), float(p[1])
    xs = np.array([x, x + h, x - h, x, x])
    ys = np.array([y, y, y, y + h, y - h])
    X, Y = pro.XY(xs, ys)
    Yx = (Y[1] - Y[2]) / (2 * h)
    Xy = (X[3] - X[4]) / (2 * h)
    L = Yx - Xy + X[0] @ Y[0] - Y[0] @ X[0]
    return SymmetryConnectionSample((x, y), X[0], Y[0], L)


def jet_of(Z: VectorField, p, env=None) -> np.ndarray:
    """Numeric Ẑ at p for a symbolic field."""
    exprs = []
    for a, i, j in JET_ORDER:
        e = Z.components[a]
        e = _d(e, *(["x"] * i + ["y"] * j))
        exprs.append(e)
    vals = compile_exprs(exprs, env)(np.array([p[0]], float), np.array([p[1]], float))
    return np.array([v[0] for v in vals])


def jet_derivatives(Z: VectorField, p, env=None) -> tuple[np.ndarray, np.ndarray]:
    """(∂_x Ẑ, ∂_y Ẑ) at p, computed symbolically."""
    ex, ey = [], []
    for a, i, j in JET_ORDER:
        e = Z.components[a]
        ex.append(_d(e, *(["x"] * (i + 1) + ["y"] * j)))
        ey.append(_d(e, *(["x"] * i + ["y"] * (j + 1))))
    f = compile_exprs(ex + ey, env)
    vals = f(np.array([p[0]], float), np.array([p[1]], float))
    v = np.array([a[0] for a in vals])
    return v[:8], v[8:]


def symmetry_dimension_bound(pc: ProjectiveConnection, samples: Samples | None = None, tol: float = FD_TOL) -> str:
    """'=8' iff the prolonged connection is flat at every sample, else '<8'."""
    s = samples if samples is not None else pc.samples()
    for x, y in zip(s.xs, s.ys):
        if prolonged_connection_at(pc, (x, y)).curvature_norm > tol:
            return "<8"
    return "=8"
