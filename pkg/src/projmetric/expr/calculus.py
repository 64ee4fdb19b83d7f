"""Differentiation, substitution and simplification."""

from __future__ import annotations

import sys
from fractions import Fraction

from .nodes import (
    ONE,
    ZERO,
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
    add,
    as_expr,
    cos,
    div,
    exp,
    mul,
    neg,
    pow_int,
    pow_rat,
    sin,
    FUNCTIONS,
)

sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))


def diff(e: Expr, coord: str) -> Expr:
    """Exact derivative with respect to coordinate ``x`` or ``y`` (memoised)."""
    if coord not in ("x", "y"):
        raise ValueError(f"can only differentiate by x or y, not {coord!r}")
    if coord not in e.coords:
        return ZERO
    cache = e._dcache
    if cache is None:
        cache = e._dcache = {}
    hit = cache.get(coord)
    if hit is None:
        hit = cache[coord] = _diff(e, coord)
    return hit


def _diff(e: Expr, c: str) -> Expr:
    if isinstance(e, Coord):
        return ONE
    if isinstance(e, Neg):
        return neg(diff(e.arg, c))
    if isinstance(e, Add):
        return add(*(diff(t, c) for t in e.terms))
    if isinstance(e, Mul):
        fs = e.factors
        out = []
        for i, f in enumerate(fs):
            df = diff(f, c)
            if df == ZERO:
                continue
            out.append(mul(*fs[:i], df, *fs[i + 1 :]))
        return add(*out)
    if isinstance(e, Div):
        da, db = diff(e.num, c), diff(e.den, c)
        first = div(da, e.den)
        if db == ZERO:
            return first
        return add(first, neg(div(mul(e.num, db), pow_int(e.den, 2))))
    if isinstance(e, PowInt):
        return mul(e.n, pow_int(e.base, e.n - 1), diff(e.base, c))
    if isinstance(e, PowRat):
        fr = Fraction(e.p, e.q)
        return mul(float(fr), pow_rat(e.base, e.p - e.q, e.q), diff(e.base, c))
    if isinstance(e, Exp):
        return mul(e, diff(e.arg, c))
    if isinstance(e, Ln):
        return div(diff(e.arg, c), e.arg)
    if isinstance(e, Atan):
        return div(diff(e.arg, c), add(1, pow_int(e.arg, 2)))
    if isinstance(e, Sin):
        return mul(cos(e.arg), diff(e.arg, c))
    if isinstance(e, Cos):
        return neg(mul(sin(e.arg), diff(e.arg, c)))
    raise TypeError(f"cannot differentiate {type(e).__name__}")


def rebuild(e: Expr, kids) -> Expr:
    """Reconstruct ``e`` with new children through the smart constructors."""
    if isinstance(e, Neg):
        return neg(kids[0])
    if isinstance(e, Add):
        return add(*kids)
    if isinstance(e, Mul):
        return mul(*kids)
    if isinstance(e, Div):
        return div(*kids)
    if isinstance(e, PowInt):
        return pow_int(kids[0], e.n)
    if isinstance(e, PowRat):
        return pow_rat(kids[0], e.p, e.q)
    cls = type(e)
    if cls.__name__.lower() in ("exp", "ln", "atan", "sin", "cos"):
        from . import nodes

        return getattr(nodes, cls.fname)(kids[0])
    return e


def substitute(e: Expr, mapping: dict) -> Expr:
    """Replace coordinates/parameters by expressions. Keys are names."""
    mapping = {k: as_expr(v) for k, v in mapping.items()}
    memo: dict = {}

    def go(n: Expr) -> Expr:
        hit = memo.get(n)
        if hit is not None:
            return hit
        if isinstance(n, (Coord, Param)):
            out = mapping.get(n.name, n)
        elif isinstance(n, Const):
            out = n
        else:
            out = rebuild(n, [go(k) for k in n.children])
        memo[n] = out
        return out

    return go(e)


def free_params(e: Expr) -> set[str]:
    seen, out, stack = set(), set(), [e]
    while stack:
        n = stack.pop()
        if id(n) in seen:
            continue
        seen.add(id(n))
        if isinstance(n, Param):
            out.add(n.name)
        stack.extend(n.children)
    return out


def size(e: Expr) -> int:
    """Number of distinct nodes in the DAG."""
    seen, stack = set(), [e]
    while stack:
        n = stack.pop()
        if id(n) in seen:
            continue
        seen.add(id(n))
        stack.extend(n.children)
    return len(seen)


# ---------------------------------------------------------------------------
# simplification


def _sort_key(e: Expr):
    return (len(str(e)), str(e))


def _split_coef(t: Expr):
    if isinstance(t, Mul) and isinstance(t.factors[0], Const):
        c = t.factors[0].value
        rest = t.factors[1:]
        return c, (rest[0] if len(rest) == 1 else Mul(rest))
    if isinstance(t, Const):
        return t.value, ONE
    return 1.0, t


def _collect_add(terms) -> Expr:
    coefs: dict = {}
    order = []
    const = 0.0
    for t in terms:
        c, m = _split_coef(t)
        if m == ONE:
            const += c
            continue
        if m not in coefs:
            coefs[m] = 0.0
            order.append(m)
        coefs[m] += c
    out = [mul(coefs[m], m) for m in sorted(order, key=_sort_key) if coefs[m] != 0.0]
    if const != 0.0:
        out.append(Const(const))
    return add(*out)


def _collect_mul(factors) -> Expr:
    const = 1.0
    powers: dict = {}
    order = []
    exp_args = []

    def push(base, k):
        if base not in powers:
            powers[base] = Fraction(0)
            order.append(base)
        powers[base] += k

    stack = [(f, Fraction(1)) for f in factors]
    while stack:
        f, k = stack.pop()
        if isinstance(f, Const):
            if k.denominator == 1:
                const *= f.value ** int(k)
            elif f.value > 0:
                const *= f.value ** float(k)
            else:
                push(f, k)
        elif isinstance(f, Mul):
            stack.extend((g, k) for g in f.factors)
        elif isinstance(f, Div):
            stack.append((f.num, k))
            stack.append((f.den, -k))
        elif isinstance(f, PowInt):
            stack.append((f.base, k * f.n))
        elif isinstance(f, PowRat) and k.denominator == 1:
            push(f.base, k * Fraction(f.p, f.q))
        elif isinstance(f, Exp) and k.denominator == 1:
            exp_args.append(mul(int(k), f.arg))
        else:
            push(f, k)
    if const == 0.0:
        return ZERO
    out = []
    if exp_args:
        a = _collect_add(_flatten_add(exp_args))
        if a != ZERO:
            out.append(exp(a))
    num, den = [], []
    for b in sorted(order, key=_sort_key):
        k = powers[b]
        if k == 0:
            continue
        if k > 0:
            num.append(pow_rat(b, k.numerator, k.denominator))
        else:
            den.append(pow_rat(b, -k.numerator, k.denominator))
    body = mul(const, *num, *out)
    if den:
        return div(body, mul(*den))
    return body


def _flatten_add(terms):
    out = []
    for t in terms:
        if isinstance(t, Add):
            out.extend(_flatten_add(t.terms))
        elif isinstance(t, Neg):
            out.extend(mul(-1, u) for u in _flatten_add([t.arg]))
        else:
            out.append(t)
    return out


def simplify(e: Expr) -> Expr:
    """Value-preserving normalisation.

    Folds constants, absorbs 0 and 1, flattens sums and products, collects
    like terms and integer powers of a common base, and merges exponentials.
    It is not a canonical form: equivalence is still decided numerically
    (see :func:`projmetric.expr.evaluate.is_zero`).
    """
    memo: dict = {}

    def go(n: Expr) -> Expr:
        hit = memo.get(n)
        if hit is not None:
            return hit
        if not n.children:
            out = n
        else:
            kids = [go(k) for k in n.children]
            if isinstance(n, Add):
                out = _collect_add(_flatten_add(kids))
            elif isinstance(n, Neg):
                out = _collect_mul([Const(-1), kids[0]])
            elif isinstance(n, (Mul, Div, PowInt)):
                out = _collect_mul([rebuild(n, kids)])
            else:
                out = rebuild(n, kids)
        memo[n] = out
        return out

    return go(e)


__all__ = ["diff", "simplify", "substitute", "free_params", "size", "rebuild", "FUNCTIONS"]
