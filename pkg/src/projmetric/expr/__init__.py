"""Closed-form expressions in the coordinates x, y with named real parameters."""

from .calculus import diff, free_params, simplify, size, substitute
from .evaluate import ParamEnv, compile_exprs, evaluate, evaluate_many, is_zero
from .nodes import (
    ONE,
    X,
    Y,
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
    atan,
    const,
    cos,
    div,
    exp,
    ln,
    mul,
    neg,
    param,
    pow_int,
    pow_rat,
    sin,
    sqrt,
    sub,
)
from .parse import parse


def to_text(e: Expr) -> str:
    """Printer whose output :func:`parse` accepts."""
    return str(e)


__all__ = [
    "Expr", "Const", "Coord", "Param", "Neg", "Add", "Mul", "Div", "PowInt",
    "PowRat", "Exp", "Ln", "Atan", "Sin", "Cos", "X", "Y", "ZERO", "ONE",
    "ParamEnv", "parse", "to_text", "diff", "simplify", "substitute",
    "free_params", "size", "evaluate", "evaluate_many", "compile_exprs",
    "is_zero", "add", "sub", "mul", "div", "neg", "pow_int", "pow_rat",
    "exp", "ln", "atan", "sin", "cos", "sqrt", "const", "param", "as_expr",
]
