"""Metrisability of projective connections.

A metric g is encoded by a = det(g)^{-2/3} g. Powers of det use the real cube
root, so for det < 0 the matrix a is still real (with det a < 0).

For connections y'' = A e^x + B y' + C e^{-x} y'^2 + D e^{-2x} y'^3 the
linear system for a reduces, under the exponential-polynomial ansatz in y,
to c' = M(x) c for c = (c01, c02, c03, c11, c12, c13, c21, c22, c23) plus
three algebraic constraints. Ansatz used here:

    a11 = Σ c0j φj,   a12 = ½ Σ c1j φj,   a22 = Σ c2j φj

with φ = (e^{α1 y}, e^{α2 y}, e^{α3 y}), (e^{α1 y}, e^{α2 y}, y e^{α2 y}) or
(e^{αy}, y e^{αy}, y² e^{αy}) for cases 1, 2, 3.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import subspace_angles

from .errors import (
    DegenerateMetricError,
    IndeterminateError,
    IntegrationError,
    InvalidParameterError,
)
from .expr import (
    X,
    Expr,
    add,
    as_expr,
    compile_exprs,
    diff,
    exp,
    mul,
    neg,
    pow_int,
    pow_rat,
    simplify,
)
from .geometry import DET_FLOOR, Domain, Metric2, Samples
from .projective import ProjectiveConnection, Residual

RANK_REL = 1e-7
RANK_GAP = 1e3


@dataclass(frozen=True)
class QuadraticForm:
    """Symmetric field a11 ξ1² + 2 a12 ξ1 ξ2 + a22 ξ2²."""

    a11: Expr
    a12: Expr
    a22: Expr
    label: str = ""

    def __post_init__(self):
        for k in ("a11", "a12", "a22"):
            object.__setattr__(self, k, as_expr(getattr(self, k)))

    @property
    def matrix(self):
        return ((self.a11, self.a12), (self.a12, self.a22))

    @property
    def det(self) -> Expr:
        return add(mul(self.a11, self.a22), neg(mul(self.a12, self.a12)))

    def components(self) -> list[Expr]:
        return [self.a11, self.a12, self.a22]

    def scaled(self, factor) -> "QuadraticForm":
        f = as_expr(factor)
        return QuadraticForm(mul(f, self.a11), mul(f, self.a12), mul(f, self.a22), self.label)

    def __add__(self, other: "QuadraticForm") -> "QuadraticForm":
        return QuadraticForm(
            add(self.a11, other.a11), add(self.a12, other.a12), add(self.a22, other.a22)
        )

    def __mul__(self, k) -> "QuadraticForm":
        return self.scaled(k)

    __rmul__ = __mul__

    def evaluate(self, xs, ys, env=None):
        return compile_exprs(self.components(), env)(xs, ys)

    def value(self, xs, ys, vx, vy, env=None):
        a, b, c = self.evaluate(xs, ys, env)
        return a * vx * vx + 2 * b * vx * vy + c * vy * vy

    @classmethod
    def from_metric(cls, g: Metric2) -> "QuadraticForm":
        return cls(g.E, g.F, g.G, g.label)


def mobility_matrix(g: Metric2, check: bool = True) -> QuadraticForm:
    if check:
        g.check_nondegenerate()
    f = pow_rat(g.det, -2, 3)
    return QuadraticForm(simplify(mul(f, g.E)), simplify(mul(f, g.F)), simplify(mul(f, g.G)), f"a({g.label})")


def lin1_equations(pc: ProjectiveConnection, a: QuadraticForm) -> list[Expr]:
    K0, K1, K2, K3 = pc.K
    a11, a12, a22 = a.components()
    dx = lambda e: diff(e, "x")
    dy = lambda e: diff(e, "y")
    return [
        add(dx(a11), mul(-2 / 3, K1, a11), mul(2, K0, a12)),
        add(dy(a11), mul(2, dx(a12)), mul(-4 / 3, K2, a11), mul(2 / 3, K1, a12), mul(2, K0, a22)),
        add(mul(2, dy(a12)), dx(a22), mul(-2, K3, a11), mul(-2 / 3, K2, a12), mul(4 / 3, K1, a22)),
        add(dy(a22), mul(-2, K3, a12), mul(2 / 3, K2, a22)),
    ]


def lin1_residual(pc: ProjectiveConnection, a: QuadraticForm, samples: Samples | None = None, env=None) -> Residual:
    s = samples if samples is not None else pc.samples()
    e = dict(pc.env)
    e.update(env or {})
    vals = compile_exprs(lin1_equations(pc, a), e)(s.xs, s.ys)
    per = tuple(float(np.max(np.abs(v))) for v in vals)
    return Residual(max(per), per)


def metric_from_mobility(a: QuadraticForm, env=None, domain: Domain | None = None, label="g(a)", samples=None) -> Metric2:
    """Inverse of :func:`mobility_matrix`: g = a / det(a)²."""
    dom = domain or Domain()
    d = simplify(a.det)
    from .geometry import sample_points

    s = samples if samples is not None else sample_points(dom, 100, env)
    (dv,) = compile_exprs([d], env)(s.xs, s.ys)
    if np.any(np.abs(dv) <= DET_FLOOR):
        raise DegenerateMetricError("det a vanishes at a sample point")
    w = pow_int(d, -2)
    return Metric2(simplify(mul(w, a.a11)), simplify(mul(w, a.a12)), simplify(mul(w, a.a22)), dict(env or {}), dom, label)


def general_solution_family(B: float, D: float, lam: float = 1.0, H: float = 0.0) -> QuadraticForm:
    """Diagonal metrisation family of the connection y'' = B y' + D e^{-2x} y'^3."""
    if lam == 0:
        raise InvalidParameterError("lambda must be nonzero (a would be degenerate)")
    if D == 0:
        raise InvalidParameterError("D must be nonzero")
    if B == 1:
        a11 = exp(mul(2 / 3, X))
        a22 = mul(add(mul(2 * D, X), H), exp(mul(-4 / 3, X)))
    else:
        a11 = exp(mul(2 * B / 3, X))
        inner = add(mul(D / (B - 1), exp(mul(2 * (B - 1), X))), H)
        a22 = mul(inner, exp(mul(-4 * B / 3, X)))
    return QuadraticForm(mul(lam, a11), 0, mul(lam, a22), f"family(B={B:g},D={D:g},lam={lam:g},H={H:g})")


# ---------------------------------------------------------------------------
# ABCD normal form and the coefficient ODE system


@dataclass(frozen=True)
class ABCDConnection:
    A: float
    B: float
    C: float
    D: float

    def normalized(self) -> bool:
        """One of the normalisation classes (D≠0, C=0), (D=0, C≠0, B=0), all zero."""
        A, B, C, D = self.A, self.B, self.C, self.D
        return (D != 0 and C == 0) or (D == 0 and C != 0 and B == 0) or (A == B == C == D == 0)

    def connection(self, domain=None) -> ProjectiveConnection:
        from .projective import abcd_connection

        return abcd_connection(self.A, self.B, self.C, self.D, domain)


_K_BY_CASE = {1: (0, 0), 2: (0, -1), 3: (-1, -2)}


def _normalise_alphas(case: int, alphas) -> tuple[complex, complex, complex]:
    al = np.atleast_1d(np.asarray(alphas, dtype=complex))
    if case == 3:
        if len(al) == 1:
            al = np.repeat(al, 3)
        if not (len(al) == 3 and al[0] == al[1] == al[2]):
            raise InvalidParameterError("case 3 needs α1 = α2 = α3")
        if al[0].imag != 0:
            raise InvalidParameterError("case 3 needs a real α")
    elif case == 2:
        if len(al) == 2:
            al = np.array([al[0], al[1], al[1]])
        if not (len(al) == 3 and al[1] == al[2] and al[0] != al[1]):
            raise InvalidParameterError("case 2 needs α1 ≠ α2 = α3")
        if al[0].imag != 0:
            raise InvalidParameterError("case 2 needs a real α1")
    elif case == 1:
        if len(al) != 3 or len({complex(a) for a in al}) != 3:
            raise InvalidParameterError("case 1 needs three distinct α")
        if al[0].imag != 0:
            raise InvalidParameterError("case 1 needs a real α1")
    else:
        raise InvalidParameterError(f"case must be 1, 2 or 3, got {case!r}")
    if case in (1, 2):
        s = {complex(a) for a in al}
        if any(a.conjugate() not in s for a in s):
            raise InvalidParameterError("complex α must come in conjugate pairs")
    return tuple(complex(a) for a in al)


@dataclass(frozen=True)
class CoefficientSystem:
    abcd: ABCDConnection
    case: int
    alphas: tuple[complex, complex, complex]
    k1: int
    k2: int
    displayed_constraint: bool = False

    @property
    def is_complex(self) -> bool:
        return any(a.imag != 0 for a in self.alphas)

    def M(self, x: float) -> np.ndarray:
        A, B, C, D = self.abcd.A, self.abcd.B, self.abcd.C, self.abcd.D
        a1, a2, a3 = self.alphas
        ex, emx, em2x = np.exp(x), np.exp(-x), np.exp(-2 * x)
        M = np.zeros((9, 9), dtype=complex)
        for j, al in enumerate((a1, a2, a3)):
            M[j, j] = 2 * B / 3
            M[j, 3 + j] = -A * ex
            M[3 + j, j] = 4 / 3 * C * emx - al
            M[3 + j, 3 + j] = -B / 3
            M[3 + j, 6 + j] = -2 * A * ex
            M[6 + j, j] = 2 * D * em2x
            M[6 + j, 3 + j] = 1 / 3 * C * emx - al
            M[6 + j, 6 + j] = -4 / 3 * B
        M[3, 1], M[4, 2] = self.k1, self.k2
        M[6, 4], M[7, 5] = self.k1, self.k2
        return M

    def T(self, x: float) -> np.ndarray:
        C = self.abcd.C
        s = 1 if self.displayed_constraint else -1
        T = np.diag([a + 2 / 3 * C * np.exp(-x) for a in self.alphas]).astype(complex)
        T[0, 1], T[1, 2] = s * self.k1, s * self.k2
        return T

    def coupling(self, x: float) -> complex:
        return self.abcd.D * np.exp(-2 * x)

    def constraint_rows(self, x: float) -> np.ndarray:
        """3×9 map c ↦ T c₂ − D e^{-2x} c₁."""
        W = np.zeros((3, 9), dtype=complex)
        W[:, 3:6] = -self.coupling(x) * np.eye(3)
        W[:, 6:9] = self.T(x)
        return W

    # ansatz basis in y and its derivative
    def basis(self, y: np.ndarray):
        y = np.asarray(y, dtype=complex)
        a1, a2, a3 = self.alphas
        if self.case == 1:
            phi = [np.exp(a1 * y), np.exp(a2 * y), np.exp(a3 * y)]
            dphi = [a1 * phi[0], a2 * phi[1], a3 * phi[2]]
        elif self.case == 2:
            e1, e2 = np.exp(a1 * y), np.exp(a2 * y)
            phi = [e1, e2, y * e2]
            dphi = [a1 * e1, a2 * e2, e2 + a2 * y * e2]
        else:
            e = np.exp(a1 * y)
            phi = [e, y * e, y * y * e]
            dphi = [a1 * e, e + a1 * y * e, 2 * y * e + a1 * y * y * e]
        return np.array(phi), np.array(dphi)


def build_ode_system(abcd: ABCDConnection, case: int, alphas=0.0, displayed_constraint: bool = False) -> CoefficientSystem:
    al = _normalise_alphas(case, alphas)
    k1, k2 = _K_BY_CASE[case]
    return CoefficientSystem(abcd, case, al, k1, k2, displayed_constraint)


class SolutionSpace(NamedTuple):
    dimension: int
    singular_values: np.ndarray
    basis: np.ndarray  # columns: initial conditions c(x0) spanning the solutions
    x0: float
    check_points: np.ndarray
    system: CoefficientSystem
    flow: object  # callable x -> fundamental matrix


def fundamental_matrix(sys: CoefficientSystem, x_range=(0.5, 2.5), rtol: float = 1e-10, atol: float = 1e-12):
    """Dense fundamental matrix Φ(x) with Φ(x0) = I, integrated by DOP853."""
    x0, x1 = x_range

    def rhs(x, v):
        return (sys.M(x) @ v.reshape(9, 9)).ravel()

    sol = solve_ivp(rhs, (x0, x1), np.eye(9, dtype=complex).ravel(), method="DOP853",
                    rtol=rtol, atol=atol, dense_output=True)
    if not sol.success:
        raise IntegrationError(f"fundamental matrix integration failed: {sol.message}")

    def phi(x):
        return sol.sol(x).reshape(9, 9)

    return phi


def decide_rank(s: np.ndarray, rel: float = RANK_REL, gap: float = RANK_GAP) -> int:
    """Numerical rank with a mandatory gap between kept and dropped values."""
    s = np.sort(np.asarray(s, float))[::-1]
    if s.size == 0 or s[0] == 0:
        return 0
    kept = s > rel * s[0]
    r = int(np.sum(kept))
    if r < s.size:
        dropped = s[r]
        if dropped > 0 and s[r - 1] / dropped < gap:
            raise IndeterminateError(
                f"indeterminate rank: singular value gap {s[r - 1]:.3e}/{dropped:.3e} below {gap:g}"
            )
    return r


def solution_space(sys: CoefficientSystem, x_range=(0.5, 2.5), n_check: int = 12) -> SolutionSpace:
    phi = fundamental_matrix(sys, x_range)
    xs = np.linspace(x_range[0], x_range[1], n_check)
    rows = []
    for x in xs:
        R = sys.constraint_rows(x) @ phi(x)
        for r in R:
            n = np.linalg.norm(r)
            rows.append(r / n if n > 0 else r)
    S = np.array(rows)
    _, s, vh = np.linalg.svd(S)
    rank = decide_rank(s)
    basis = vh[rank:].conj().T
    return SolutionSpace(9 - rank, s, basis, float(x_range[0]), xs, sys, phi)


def solution_space_dimension(sys: CoefficientSystem, x_range=(0.5, 2.5), n_check: int = 12) -> int:
    return solution_space(sys, x_range, n_check).dimension


def ode_residual(space: SolutionSpace, n: int = 50, h: float = 1e-5) -> float:
    """Max relative |c' − M c| over interior points, c' by central differences."""
    x0, x1 = space.check_points[0], space.check_points[-1]
    worst = 0.0
    for x in np.linspace(x0 + 10 * h, x1 - 10 * h, n):
        dphi = (space.flow(x + h) - space.flow(x - h)) / (2 * h)
        for c0 in space.basis.T:
            c = space.flow(x) @ c0
            lhs = dphi @ c0
            rhs = space.system.M(x) @ c
            worst = max(worst, np.linalg.norm(lhs - rhs) / max(np.linalg.norm(rhs), 1e-300))
    return float(worst)


def reassembly_residual(space: SolutionSpace, n_x: int = 20, ys=(-0.5, 0.0, 0.4), h: float = 1e-5) -> float:
    """Relative residual of the four metrisation equations on the reassembled a.

    c' is taken from finite differences of the integrated flow so this check
    does not reuse the rows of M.
    """
    sys = space.system
    A, B, C, D = sys.abcd.A, sys.abcd.B, sys.abcd.C, sys.abcd.D
    x0, x1 = space.check_points[0], space.check_points[-1]
    worst = 0.0
    phi_y, dphi_y = sys.basis(np.asarray(ys))
    for x in np.linspace(x0 + 10 * h, x1 - 10 * h, n_x):
        K0, K1, K2, K3 = A * np.exp(x), B, C * np.exp(-x), D * np.exp(-2 * x)
        for c0 in space.basis.T:
            c = space.flow(x) @ c0
            dc = (space.flow(x + h) - space.flow(x - h)) @ c0 / (2 * h)
            a11, a12, a22 = c[0:3] @ phi_y, 0.5 * (c[3:6] @ phi_y), c[6:9] @ phi_y
            a11x, a12x, a22x = dc[0:3] @ phi_y, 0.5 * (dc[3:6] @ phi_y), dc[6:9] @ phi_y
            a11y, a12y, a22y = c[0:3] @ dphi_y, 0.5 * (c[3:6] @ dphi_y), c[6:9] @ dphi_y
            eqs = [
                a11x - 2 / 3 * K1 * a11 + 2 * K0 * a12,
                a11y + 2 * a12x - 4 / 3 * K2 * a11 + 2 / 3 * K1 * a12 + 2 * K0 * a22,
                2 * a12y + a22x - 2 * K3 * a11 - 2 / 3 * K2 * a12 + 4 / 3 * K1 * a22,
                a22y - 2 * K3 * a12 + 2 / 3 * K2 * a22,
            ]
            scale = max(np.max(np.abs([a11, a12, a22])), 1e-300)
            worst = max(worst, float(np.max(np.abs(eqs))) / scale)
    return worst


def family_tangent_space(B: float, D: float, x0: float) -> np.ndarray:
    """Initial conditions (case 3, α=0) of ∂a/∂λ and ∂a/∂H for the diagonal family."""
    v_lam = np.zeros(9)
    v_h = np.zeros(9)
    if B == 1:
        v_lam[0] = np.exp(2 * x0 / 3)
        v_lam[6] = 2 * D * x0 * np.exp(-4 * x0 / 3)
        v_h[6] = np.exp(-4 * x0 / 3)
    else:
        v_lam[0] = np.exp(2 * B * x0 / 3)
        v_lam[6] = D * np.exp(2 * (B - 1) * x0) / (B - 1) * np.exp(-4 * B * x0 / 3)
        v_h[6] = np.exp(-4 * B * x0 / 3)
    return np.stack([v_lam, v_h], axis=1)


def max_subspace_angle(U: np.ndarray, V: np.ndarray) -> float:
    U = np.asarray(U)
    V = np.asarray(V)
    if np.iscomplexobj(U) or np.iscomplexobj(V):
        U = U.astype(complex)
        V = V.astype(complex)
    return float(np.max(subspace_angles(U, V)))
