"""Vectorised numeric evaluation.

Expressions are compiled into straight-line numpy code, one temporary per
distinct DAG node, so shared subexpressions are computed once. Parameters
are baked in at compile time. Domain violations raise ``DomainError`` naming
the first offending point.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from typing import Callable

import numpy as np

from ..errors import DomainError, UnboundParameterError
from .nodes import (
    Add,
    Atan,
    Const,
    Coord,
    Cos,
    Div,
    Exp,
    Expr,
    Ln,
    Mul,
    Neg,
    Param,
    PowInt,
    PowRat,
    Sin,
    as_expr,
)

ParamEnv = Mapping[str, float]


def _point(mask, X, Y):
    idx = int(np.flatnonzero(np.broadcast_to(mask, np.shape(X)).ravel())[0])
    xs = np.broadcast_to(X, np.shape(X)).ravel()
    ys = np.broadcast_to(Y, np.shape(X)).ravel()
    return (float(np.real(xs[idx])), float(np.real(ys[idx])))


def _div(a, b, X, Y):
    bad = b == 0
    if np.any(bad):
        raise DomainError("division by zero", _point(bad, X, Y))
    return a / b


def _ln(a, X, Y):
    bad = ~(a > 0)
    if np.any(bad):
        raise DomainError("logarithm of a nonpositive value", _point(bad, X, Y))
    return np.log(a)


def _powint(a, n, X, Y):
    if n < 0:
        bad = a == 0
        if np.any(bad):
            raise DomainError("negative power of zero", _point(bad, X, Y))
        return 1.0 / a ** (-n)
    return a**n


def _powrat(a, p, q, X, Y):
    if q % 2 == 0:
        bad = a < 0
        if np.any(bad):
            raise DomainError(f"even root of a negative value (exponent {p}/{q})", _point(bad, X, Y))
    if p < 0:
        bad = a == 0
        if np.any(bad):
            raise DomainError("negative power of zero", _point(bad, X, Y))
    if q == 3:
        r = np.cbrt(a)
    elif q == 2:
        r = np.sqrt(a)
    else:
        r = np.sign(a) * np.abs(a) ** (1.0 / q)
    return _powint(r, p, X, Y)


_HELPERS = {
    "np": np,
    "_div": _div,
    "_ln": _ln,
    "_powint": _powint,
    "_powrat": _powrat,
}


def _env_value(name: str, env: ParamEnv) -> float:
    try:
        return float(env[name])
    except KeyError:
        raise UnboundParameterError(name) from None


def compile_exprs(exprs: Sequence[Expr], env: ParamEnv | None = None) -> Callable:
    """Compile expressions into ``f(X, Y) -> list[np.ndarray]``.

    The returned arrays always have the broadcast shape of ``X`` and ``Y``.
    """
    env = env or {}
    exprs = [as_expr(e) for e in exprs]
    names: dict = {}
    lines: list[str] = []
    counter = [0]

    def fresh():
        counter[0] += 1
        return f"t{counter[0]}"

    def emit(n: Expr) -> str:
        # iterative post-order to survive very deep trees
        stack = [(n, False)]
        while stack:
            node, ready = stack.pop()
            if node in names:
                continue
            if not ready:
                stack.append((node, True))
                for k in node.children:
                    if k not in names:
                        stack.append((k, False))
                continue
            names[node] = _line(node)
        return names[n]

    def _line(node: Expr) -> str:
        if isinstance(node, Const):
            return repr(node.value)
        if isinstance(node, Coord):
            return "X" if node.name == "x" else "Y"
        if isinstance(node, Param):
            return repr(_env_value(node.name, env))
        k = [names[c] for c in node.children]
        if isinstance(node, Neg):
            rhs = f"-({k[0]})"
        elif isinstance(node, Add):
            rhs = " + ".join(f"({s})" for s in k)
        elif isinstance(node, Mul):
            rhs = " * ".join(f"({s})" for s in k)
        elif isinstance(node, Div):
            rhs = f"_div({k[0]}, {k[1]}, X, Y)"
        elif isinstance(node, PowInt):
            rhs = f"_powint({k[0]}, {node.n}, X, Y)"
        elif isinstance(node, PowRat):
            rhs = f"_powrat({k[0]}, {node.p}, {node.q}, X, Y)"
        elif isinstance(node, Exp):
            rhs = f"np.exp({k[0]})"
        elif isinstance(node, Ln):
            rhs = f"_ln({k[0]}, X, Y)"
        elif isinstance(node, Atan):
            rhs = f"np.arctan({k[0]})"
        elif isinstance(node, Sin):
            rhs = f"np.sin({k[0]})"
        elif isinstance(node, Cos):
            rhs = f"np.cos({k[0]})"
        else:  # pragma: no cover
            raise TypeError(type(node).__name__)
        t = fresh()
        lines.append(f"    {t} = {rhs}")
        return t

    outs = [emit(e) for e in exprs]
    body = "\n".join(lines)
    ret = ", ".join(f"_bc({o}, X, Y)" for o in outs)
    src = f"def _f(X, Y):\n{body}\n    return [{ret}]\n"
    ns = dict(_HELPERS)
    ns["_bc"] = _bc
    exec(compile(src, "<projmetric-expr>", "exec"), ns)
    fn = ns["_f"]

    def run(X, Y):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            return fn(X, Y)

    run.source = src
    return run


def _bc(v, X, Y):
    shape = np.broadcast_shapes(np.shape(X), np.shape(Y))
    v = np.asarray(v, dtype=float)
    if v.shape == shape:
        return v
    return np.broadcast_to(v, shape).copy()


def evaluate(e, point, env: ParamEnv | None = None) -> float:
    """Evaluate ``e`` at a single point ``(x, y)``."""
    x, y = point
    (v,) = compile_exprs([e], env)(np.array([x], float), np.array([y], float))
    return float(v[0])


def evaluate_many(e, xs, ys, env: ParamEnv | None = None) -> np.ndarray:
    (v,) = compile_exprs([e], env)(xs, ys)
    return v


_ZERO_RNG_SEED = 20240611


def zero_test_points(n: int = 16, box=(0.3, 1.7, -1.0, 1.0), seed: int = _ZERO_RNG_SEED):
    rng = np.random.default_rng(seed)
    x0, x1, y0, y1 = box
    return rng.uniform(x0, x1, n), rng.uniform(y0, y1, n)


def is_zero(e, env: ParamEnv | None = None, points=None, tol: float = 1e-10) -> bool:
    """Probabilistic zero test: ``|e| <= tol`` at 16 sample points.

    Points where ``e`` is outside its domain are skipped; if none remain
    the test is inconclusive and ``DomainError`` propagates.
    """
    if points is None:
        points = zero_test_points()
    xs, ys = (np.asarray(p, float) for p in points)
    f = compile_exprs([e], env)
    try:
        (v,) = f(xs, ys)
    except DomainError:
        vals = []
        for xi, yi in zip(xs, ys):
            try:
                vals.append(f(np.array([xi]), np.array([yi]))[0][0])
            except DomainError:
                continue
        if not vals:
            raise
        v = np.array(vals)
    return bool(np.all(np.abs(v) <= tol))
