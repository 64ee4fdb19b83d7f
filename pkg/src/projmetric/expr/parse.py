"""Recursive-descent parser for the expression grammar.

    expr     := term (('+'|'-') term)*
    term     := factor (('*'|'/') factor)*
    factor   := '-' factor | atom ('^' exponent)?
    atom     := number | ident | '(' expr ')' | func '(' expr ')'
    exponent := ['-'] integer | '(' ['-'] integer ['/' integer] ')'

Unary minus and signed exponents extend the base grammar so that printed
expressions always parse back. ``x`` and ``y`` are coordinates; every other
identifier is a parameter.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import ParseError, UnknownFunctionError
from .nodes import (
    FUNCTIONS,
    Add,
    Const,
    Coord,
    Div,
    Expr,
    Mul,
    Neg,
    Param,
    pow_int,
    PowInt,
    PowRat,
)

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<id>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


@dataclass(frozen=True)
class Token:
    kind: str  # num | id | op | end
    text: str
    offset: int


def tokenize(text: str) -> list[Token]:
    raw = text.encode()
    toks = []
    pos = 0
    while True:
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos and pos < len(text):
            rest = text[pos:]
            stripped = len(rest) - len(rest.lstrip())
            if pos + stripped >= len(text):
                break
            bad = pos + stripped
            raise ParseError(
                f"unexpected character {text[bad]!r}", offset=len(text[:bad].encode())
            )
        kind = m.lastgroup
        if kind is None:
            break
        start = m.start(kind)
        toks.append(Token(kind, m.group(kind), len(text[:start].encode())))
        pos = m.end()
    toks.append(Token("end", "", len(raw)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def take(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        t = self.tok
        if t.kind != "op" or t.text != text:
            found = "end of input" if t.kind == "end" else repr(t.text)
            raise ParseError(f"expected {text!r}, found {found}", offset=t.offset)
        return self.take()

    def is_op(self, *ops) -> bool:
        return self.tok.kind == "op" and self.tok.text in ops

    def parse(self) -> Expr:
        if self.tok.kind == "end":
            raise ParseError("empty expression", offset=self.tok.offset)
        e = self.expr()
        if self.tok.kind != "end":
            raise ParseError(f"unexpected token {self.tok.text!r}", offset=self.tok.offset)
        return e

    def expr(self) -> Expr:
        terms = [self.term()]
        while self.is_op("+", "-"):
            op = self.take().text
            t = self.term()
            terms.append(t if op == "+" else Neg(t))
        return terms[0] if len(terms) == 1 else Add(terms)

    def term(self) -> Expr:
        node = self.factor()
        factors = [node]
        while self.is_op("*", "/"):
            op = self.take().text
            rhs = self.factor()
            if op == "*":
                factors.append(rhs)
            else:
                left = factors[0] if len(factors) == 1 else Mul(factors)
                factors = [Div(left, rhs)]
        return factors[0] if len(factors) == 1 else Mul(factors)

    def factor(self) -> Expr:
        if self.is_op("-"):
            self.take()
            inner = self.factor()
            if isinstance(inner, Const):
                return Const(-inner.value)
            return Neg(inner)
        base = self.atom()
        if self.is_op("^"):
            self.take()
            return self.exponent(base)
        return base

    def _integer(self) -> int:
        sign = 1
        if self.is_op("-"):
            self.take()
            sign = -1
        t = self.tok
        if t.kind != "num" or not t.text.isdigit():
            raise ParseError("expected integer exponent", offset=t.offset)
        self.take()
        return sign * int(t.text)

    def exponent(self, base: Expr) -> Expr:
        if self.is_op("("):
            self.take()
            p = self._integer()
            q = 1
            if self.is_op("/"):
                self.take()
                q = self._integer()
                if q <= 0:
                    raise ParseError("exponent denominator must be positive", offset=self.toks[self.i - 1].offset)
            self.expect(")")
            if q == 1:
                return PowInt(base, p)
            from fractions import Fraction

            fr = Fraction(p, q)
            if fr.denominator == 1:
                return PowInt(base, fr.numerator)
            return PowRat(base, fr.numerator, fr.denominator)
        return PowInt(base, self._integer())

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.take()
            return Const(float(t.text))
        if t.kind == "id":
            self.take()
            if self.is_op("("):
                cls = FUNCTIONS.get(t.text)
                if cls is None:
                    raise UnknownFunctionError(f"unknown function {t.text!r}", offset=t.offset)
                self.take()
                arg = self.expr()
                self.expect(")")
                return cls(arg)
            if t.text in FUNCTIONS:
                raise ParseError(f"function {t.text!r} needs an argument", offset=self.tok.offset)
            if t.text in ("x", "y"):
                return Coord(t.text)
            return Param(t.text)
        if self.is_op("("):
            self.take()
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if t.kind == "end" else repr(t.text)
        raise ParseError(f"unexpected {found}", offset=t.offset)


def parse(text: str) -> Expr:
    """Parse ``text`` into an expression tree (no simplification applied)."""
    return _Parser(text).parse()


__all__ = ["parse", "tokenize", "Token", "pow_int"]
