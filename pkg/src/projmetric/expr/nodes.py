"""Immutable expression nodes and the smart constructors that combine them.

Node classes are plain structural containers; the module-level helpers
(``add``, ``mul``, ``div`` ...) apply light normalisation (constant folding,
0/1 absorption, flattening) so derivative trees stay small. Heavier
canonicalisation lives in :func:`projmetric.expr.calculus.simplify`.
"""

from __future__ import annotations

import math
import zlib
from fractions import Fraction
from typing import Iterable, Union

Number = Union[int, float]

# printing precedences
_P_ADD, _P_MUL, _P_NEG, _P_POW, _P_ATOM = 1, 2, 3, 4, 5


class Expr:
    __slots__ = ("_key", "_hash", "_str", "_coords", "_dcache")

    def _init(self, key):
        self._key = key
        self._hash = None
        self._str = None
        self._coords = None
        self._dcache = None

    # structural identity -------------------------------------------------
    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Expr):
            return NotImplemented
        return self._key == other._key

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self._key)
        return self._hash

    @property
    def children(self) -> tuple:
        return ()

    def stable_hash(self) -> int:
        """Process-independent hash (``str`` hashing is salted per run)."""
        return zlib.crc32(str(self).encode())

    @property
    def coords(self) -> frozenset:
        if self._coords is None:
            acc = frozenset()
            for c in self.children:
                acc = acc | c.coords
            self._coords = acc
        return self._coords

    def depends_on(self, coord: str) -> bool:
        return coord in self.coords

    # printing ------------------------------------------------------------
    def __str__(self):
        if self._str is None:
            self._str = self._fmt()
        return self._str

    def __repr__(self):
        return f"{type(self).__name__}({str(self)!r})"

    def _prec(self) -> int:
        return _P_ATOM

    def _fmt(self) -> str:  # pragma: no cover - abstract
        raise NotImplementedError

    # arithmetic sugar ----------------------------------------------------
    def __add__(self, o):
        return add(self, o)

    def __radd__(self, o):
        return add(o, self)

    def __sub__(self, o):
        return add(self, neg(o))

    def __rsub__(self, o):
        return add(o, neg(self))

    def __mul__(self, o):
        return mul(self, o)

    def __rmul__(self, o):
        return mul(o, self)

    def __truediv__(self, o):
        return div(self, o)

    def __rtruediv__(self, o):
        return div(o, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, n):
        if isinstance(n, Fraction):
            return pow_rat(self, n.numerator, n.denominator)
        if isinstance(n, int):
            return pow_int(self, n)
        raise TypeError("exponent must be int or Fraction")


def _wrap(e: Expr, prec: int) -> str:
    s = str(e)
    return f"({s})" if e._prec() < prec else s


def _fmt_number(v: float) -> str:
    if not math.isfinite(v):
        raise ValueError(f"non-finite constant {v!r} cannot be printed")
    if float(v).is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(float(v))


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: Number):
        self.value = float(value)
        self._init(("c", self.value))
        self._coords = frozenset()

    def _prec(self):
        return _P_NEG if self.value < 0 else _P_ATOM

    def _fmt(self):
        return _fmt_number(self.value)


class Coord(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        if name not in ("x", "y"):
            raise ValueError(f"coordinate must be x or y, got {name!r}")
        self.name = name
        self._init(("x", name))
        self._coords = frozenset((name,))

    def _fmt(self):
        return self.name


class Param(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self._init(("p", name))
        self._coords = frozenset()

    def _fmt(self):
        return self.name


class Neg(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg: Expr):
        self.arg = arg
        self._init(("neg", arg._key))

    @property
    def children(self):
        return (self.arg,)

    def _prec(self):
        return _P_NEG

    def _fmt(self):
        return "-" + _wrap(self.arg, _P_POW)


class Add(Expr):
    __slots__ = ("terms",)

    def __init__(self, terms: Iterable[Expr]):
        self.terms = tuple(terms)
        self._init(("add",) + tuple(t._key for t in self.terms))

    @property
    def children(self):
        return self.terms

    def _prec(self):
        return _P_ADD

    def _fmt(self):
        out = [_wrap(self.terms[0], _P_ADD)]
        for t in self.terms[1:]:
            pos = _negated(t)
            if pos is not None:
                out.append(" - " + _wrap(pos, _P_MUL))
            else:
                out.append(" + " + _wrap(t, _P_MUL if t._prec() == _P_NEG else _P_ADD))
        return "".join(out)


class Mul(Expr):
    __slots__ = ("factors",)

    def __init__(self, factors: Iterable[Expr]):
        self.factors = tuple(factors)
        self._init(("mul",) + tuple(f._key for f in self.factors))

    @property
    def children(self):
        return self.factors

    def _prec(self):
        f0 = self.factors[0]
        if isinstance(f0, Const) and f0.value == -1.0 and len(self.factors) > 1:
            return _P_NEG
        if isinstance(f0, Const) and f0.value < 0:
            return _P_NEG
        return _P_MUL

    def _fmt(self):
        fs = self.factors
        f0 = fs[0]
        if isinstance(f0, Const) and f0.value == -1.0 and len(fs) > 1:
            rest = fs[1] if len(fs) == 2 else Mul(fs[1:])
            return "-" + _wrap(rest, _P_POW)
        parts = [_wrap(f0, _P_MUL)]
        parts += [_wrap(f, _P_POW) for f in fs[1:]]
        return "*".join(parts)


class Div(Expr):
    __slots__ = ("num", "den")

    def __init__(self, num: Expr, den: Expr):
        self.num, self.den = num, den
        self._init(("div", num._key, den._key))

    @property
    def children(self):
        return (self.num, self.den)

    def _prec(self):
        return _P_MUL

    def _fmt(self):
        return _wrap(self.num, _P_MUL) + "/" + _wrap(self.den, _P_POW)


class PowInt(Expr):
    __slots__ = ("base", "n")

    def __init__(self, base: Expr, n: int):
        self.base, self.n = base, int(n)
        self._init(("powi", base._key, self.n))

    @property
    def children(self):
        return (self.base,)

    def _prec(self):
        return _P_POW

    def _fmt(self):
        return f"{_wrap(self.base, _P_ATOM)}^{self.n}"


class PowRat(Expr):
    """``base^(p/q)`` on the real branch; odd ``q`` admits negative bases."""

    __slots__ = ("base", "p", "q")

    def __init__(self, base: Expr, p: int, q: int):
        if q <= 0:
            raise ValueError("denominator of a rational exponent must be positive")
        self.base, self.p, self.q = base, int(p), int(q)
        self._init(("powr", base._key, self.p, self.q))

    @property
    def children(self):
        return (self.base,)

    def _prec(self):
        return _P_POW

    def _fmt(self):
        return f"{_wrap(self.base, _P_ATOM)}^({self.p}/{self.q})"


class _Func(Expr):
    __slots__ = ("arg",)
    fname = "?"

    def __init__(self, arg: Expr):
        self.arg = arg
        self._init((self.fname, arg._key))

    @property
    def children(self):
        return (self.arg,)

    def _fmt(self):
        return f"{self.fname}({self.arg})"


class Exp(_Func):
    __slots__ = ()
    fname = "exp"


class Ln(_Func):
    __slots__ = ()
    fname = "ln"


class Atan(_Func):
    __slots__ = ()
    fname = "atan"


class Sin(_Func):
    __slots__ = ()
    fname = "sin"


class Cos(_Func):
    __slots__ = ()
    fname = "cos"


FUNCTIONS = {cls.fname: cls for cls in (Exp, Ln, Atan, Sin, Cos)}

ZERO = Const(0)
ONE = Const(1)
X = Coord("x")
Y = Coord("y")


def _negated(t: Expr):
    """If ``t`` prints naturally as ``-u`` return ``u``, else ``None``."""
    if isinstance(t, Neg):
        return t.arg
    if isinstance(t, Const) and t.value < 0:
        return Const(-t.value)
    if isinstance(t, Mul) and isinstance(t.factors[0], Const) and t.factors[0].value < 0:
        c = -t.factors[0].value
        rest = t.factors[1:]
        if c == 1.0:
            return rest[0] if len(rest) == 1 else Mul(rest)
        return Mul((Const(c),) + rest)
    return None


# ---------------------------------------------------------------------------
# smart constructors


def as_expr(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, float, Fraction)) and not isinstance(v, bool):
        return Const(float(v))
    if isinstance(v, str):
        from .parse import parse

        return parse(v)
    raise TypeError(f"cannot convert {type(v).__name__} to Expr")


def const(v: Number) -> Const:
    return Const(v)


def is_const(e: Expr, value=None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


def add(*terms) -> Expr:
    flat = []
    c = 0.0
    for t in terms:
        t = as_expr(t)
        parts = t.terms if isinstance(t, Add) else (t,)
        for p in parts:
            if isinstance(p, Const):
                c += p.value
            else:
                flat.append(p)
    if c != 0.0:
        flat.append(Const(c))
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    return Add(flat)


def mul(*factors) -> Expr:
    flat = []
    c = 1.0
    for f in factors:
        f = as_expr(f)
        parts = f.factors if isinstance(f, Mul) else (f,)
        for p in parts:
            if isinstance(p, Const):
                c *= p.value
            elif isinstance(p, Neg):
                c = -c
                flat.append(p.arg)
            else:
                flat.append(p)
    if c == 0.0:
        return ZERO
    if not flat:
        return Const(c)
    if c != 1.0:
        flat.insert(0, Const(c))
    if len(flat) == 1:
        return flat[0]
    return Mul(flat)


def neg(e) -> Expr:
    e = as_expr(e)
    if isinstance(e, Const):
        return Const(-e.value)
    if isinstance(e, Neg):
        return e.arg
    return mul(-1, e)


def sub(a, b) -> Expr:
    return add(a, neg(b))


def div(a, b) -> Expr:
    a, b = as_expr(a), as_expr(b)
    if isinstance(b, Const):
        if b.value == 0.0:
            return Div(a, b)  # left for evaluation to report
        if b.value == 1.0:
            return a
        if isinstance(a, Const):
            return Const(a.value / b.value)
        return mul(1.0 / b.value, a) if (1.0 / b.value) * b.value == 1.0 else Div(a, b)
    if is_const(a, 0.0):
        return ZERO
    if a == b:
        return ONE
    return Div(a, b)


def pow_int(b, n: int) -> Expr:
    b = as_expr(b)
    n = int(n)
    if n == 0:
        return ONE
    if n == 1:
        return b
    if isinstance(b, Const):
        if b.value == 0.0 and n < 0:
            return PowInt(b, n)
        return Const(b.value**n)
    if isinstance(b, PowInt):
        return pow_int(b.base, b.n * n)
    return PowInt(b, n)


def pow_rat(b, p: int, q: int) -> Expr:
    fr = Fraction(int(p), int(q))
    p, q = fr.numerator, fr.denominator
    if q == 1:
        return pow_int(b, p)
    b = as_expr(b)
    if isinstance(b, Const) and (b.value > 0):
        return Const(b.value ** (p / q))
    return PowRat(b, p, q)


def exp(u) -> Expr:
    u = as_expr(u)
    if is_const(u, 0.0):
        return ONE
    if isinstance(u, Ln):
        return u.arg
    return Exp(u)


def ln(u) -> Expr:
    u = as_expr(u)
    if is_const(u, 1.0):
        return ZERO
    if isinstance(u, Exp):
        return u.arg
    return Ln(u)


def atan(u) -> Expr:
    u = as_expr(u)
    if is_const(u, 0.0):
        return ZERO
    return Atan(u)


def sin(u) -> Expr:
    u = as_expr(u)
    if is_const(u, 0.0):
        return ZERO
    return Sin(u)


def cos(u) -> Expr:
    u = as_expr(u)
    if is_const(u, 0.0):
        return ONE
    return Cos(u)


def sqrt(u) -> Expr:
    return pow_rat(u, 1, 2)


def param(name: str) -> Param:
    return Param(name)
