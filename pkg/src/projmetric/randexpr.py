"""Random expression trees for property checks of the expression engine."""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError
from .expr import (
    Expr,
    X,
    Y,
    add,
    atan,
    compile_exprs,
    const,
    cos,
    diff,
    div,
    exp,
    ln,
    mul,
    neg,
    param,
    parse,
    pow_int,
    pow_rat,
    sin,
    sub,
)

ENV = {"a": 0.7, "b": -1.3}
BOX = (0.3, 1.7, -1.0, 1.0)
VALUE_CAP = 1e6


def random_expr(rng: np.random.Generator, depth: int = 6) -> Expr:
    """A tree of at most ``depth`` levels over x, y, constants and a, b."""
    if depth <= 1 or rng.random() < 0.2:
        k = rng.integers(4)
        if k == 0:
            return X
        if k == 1:
            return Y
        if k == 2:
            return param(("a", "b")[rng.integers(2)])
        return const(float(rng.choice([-2.0, -0.5, 0.5, 1.0, 1.5, 3.0])))
    sub_ = lambda: random_expr(rng, depth - 1)
    op = rng.integers(13)
    if op == 0:
        return add(sub_(), sub_())
    if op == 1:
        return sub(sub_(), sub_())
    if op == 2:
        return mul(sub_(), sub_())
    if op == 3:
        return div(sub_(), sub_())
    if op == 4:
        return neg(sub_())
    if op == 5:
        return pow_int(sub_(), int(rng.choice([-2, -1, 2, 3])))
    if op == 6:
        return pow_rat(sub_(), int(rng.choice([1, 2, -1])), 3)
    if op == 7:
        return exp(sub_())
    if op == 8:
        return ln(sub_())
    if op == 9:
        return atan(sub_())
    if op == 10:
        return sin(sub_())
    if op == 11:
        return cos(sub_())
    return add(mul(sub_(), X), Y)


def _value(f, x, y):
    try:
        (v,) = f(np.array([x]), np.array([y]))
    except (DomainError, FloatingPointError, OverflowError, ZeroDivisionError):
        return None
    v = float(v[0])
    return v if math.isfinite(v) and abs(v) < VALUE_CAP else None


def _stencil(f, x, y, coord, h):
    pts = [(x + k * h, y) if coord == "x" else (x, y + k * h) for k in (-2, -1, 1, 2)]
    vals = [_value(f, *p) for p in pts]
    if any(v is None for v in vals):
        return None
    fm2, fm1, fp1, fp2 = vals
    return (fm2 - 8 * fm1 + 8 * fp1 - fp2) / (12 * h)


def central_difference(f, x, y, coord, h=1e-3):
    """Five-point central difference plus a self-consistency estimate."""
    d1 = _stencil(f, x, y, coord, h)
    d2 = _stencil(f, x, y, coord, h / 2)
    if d1 is None or d2 is None:
        return None
    return d2, abs(d1 - d2)


def derivative_property_failures(n_cases: int = 1000, seed: int = 0, depth: int = 6, tol: float = 1e-5):
    """Count disagreements between ``diff`` and finite differences.

    A case is drawn until the expression is finite near the point and the
    finite-difference oracle agrees with itself at two step sizes to well
    below ``tol``; only such cases are counted.
    """
    rng = np.random.default_rng(seed)
    failures = tried = accepted = 0
    while accepted < n_cases:
        tried += 1
        e = random_expr(rng, depth)
        coord = ("x", "y")[rng.integers(2)]
        x, y = rng.uniform(BOX[0], BOX[1]), rng.uniform(BOX[2], BOX[3])
        try:
            f = compile_exprs([e], ENV)
            df = compile_exprs([diff(e, coord)], ENV)
        except RecursionError:
            continue
        if _value(f, x, y) is None:
            continue
        d = _value(df, x, y)
        fd = central_difference(f, x, y, coord)
        if d is None or fd is None:
            continue
        est, spread = fd
        if spread > 1e-3 * tol * (1 + abs(est)):
            continue
        accepted += 1
        if abs(d - est) > tol * (1 + abs(d)):
            failures += 1
    return failures, tried


def roundtrip_failures(n_cases: int = 200, seed: int = 0, depth: int = 6, rel: float = 1e-12) -> int:
    """Count trees whose printed form parses to a numerically different tree."""
    rng = np.random.default_rng(seed + 1)
    xs = rng.uniform(BOX[0], BOX[1], 16)
    ys = rng.uniform(BOX[2], BOX[3], 16)
    failures = 0
    for _ in range(n_cases):
        e = random_expr(rng, depth)
        back = parse(str(e))
        with np.errstate(all="ignore"):
            va = _pointwise(e, xs, ys)
            vb = _pointwise(back, xs, ys)
        for a, b in zip(va, vb):
            if a is None and b is None:
                continue
            if a is None or b is None or abs(a - b) > rel * max(1.0, abs(a)):
                failures += 1
                break
    return failures


def _pointwise(e, xs, ys):
    f = compile_exprs([e], ENV)
    out = []
    for x, y in zip(xs, ys):
        try:
            (v,) = f(np.array([x]), np.array([y]))
            v = float(v[0])
            out.append(v if math.isfinite(v) else None)
        except (DomainError, FloatingPointError, OverflowError, ZeroDivisionError):
            out.append(None)
    return out
