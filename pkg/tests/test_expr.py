import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from projmetric.errors import DomainError, ParseError, UnboundParameterError, UnknownFunctionError
from projmetric.expr import (
    Add,
    Const,
    Coord,
    Exp,
    Mul,
    Param,
    Y,
    compile_exprs,
    diff,
    evaluate,
    free_params,
    is_zero,
    parse,
    simplify,
    substitute,
)
from projmetric.randexpr import ENV, derivative_property_failures, random_expr, roundtrip_failures


class TestParse:
    def test_coordinate(self):
        assert parse("x") == Coord("x")

    def test_catalog_factor_structure(self):
        e = parse("eps1*exp((b+2)*x)")
        assert isinstance(e, Mul)
        kids = e.children
        assert Param("eps1") in kids
        ex = next(k for k in kids if isinstance(k, Exp))
        inner = ex.children[0]
        assert isinstance(inner, Mul)
        assert any(isinstance(k, Add) for k in inner.children)

    def test_unbalanced_paren_offset(self):
        with pytest.raises(ParseError) as info:
            parse("1/(x")
        assert info.value.offset == 4

    def test_unknown_function(self):
        with pytest.raises(UnknownFunctionError):
            parse("foo(x)")

    @pytest.mark.parametrize("text", ["", "x+", "2**x", "x y", "(x))", "x^y"])
    def test_rejects(self, text):
        with pytest.raises(ParseError):
            parse(text)

    def test_precedence_and_unary_minus(self):
        assert evaluate(parse("-x^2"), (3, 0)) == -9
        assert evaluate(parse("2^-1*x"), (4, 0)) == 2
        assert evaluate(parse("1e-3*x"), (1000, 0)) == pytest.approx(1)
        assert evaluate(parse("x/2/2"), (8, 0)) == 2

    def test_rational_power_is_real_root(self):
        assert evaluate(parse("x^(1/3)"), (-8, 0)) == pytest.approx(-2)


class TestDiff:
    def test_chain_rule(self):
        e = parse("exp(b*x)")
        assert is_zero(diff(e, "x") - parse("b*exp(b*x)"), {"b": 1.7})

    def test_no_y_dependence(self):
        assert diff(parse("exp(b*x)"), "y") == Const(0)

    def test_polynomial_value(self):
        d = diff(parse("4*x^2+y^2+1"), "x")
        assert evaluate(d, (1, 2)) == pytest.approx(8, abs=1e-12)

    def test_memoized(self):
        e = parse("atan(x*y)*ln(x)")
        assert diff(e, "x") is diff(e, "x")


class TestEvaluate:
    def test_sum(self):
        assert evaluate(parse("x+y"), (1, 2)) == 3

    def test_with_param(self):
        assert evaluate(parse("exp((b+2)*x)"), (0, 5), {"b": 3}) == 1

    def test_division_by_zero_reports_point(self):
        with pytest.raises(DomainError) as info:
            evaluate(parse("1/x"), (0, 0))
        assert info.value.point == (0.0, 0.0)

    def test_log_domain(self):
        with pytest.raises(DomainError):
            evaluate(parse("ln(x)"), (-1, 0))

    def test_unbound(self):
        with pytest.raises(UnboundParameterError):
            evaluate(parse("a*x"), (1, 1))

    def test_vectorised_matches_scalar(self):
        e = parse("atan(x*y) + exp(-x)*y^3")
        xs, ys = np.linspace(0.3, 1.7, 7), np.linspace(-1, 1, 7)
        (v,) = compile_exprs([e])(xs, ys)
        for x, y, vi in zip(xs, ys, v):
            assert vi == pytest.approx(math.atan(x * y) + math.exp(-x) * y**3, rel=1e-14)


class TestSimplify:
    def test_zero_times(self):
        assert simplify(parse("0*exp(x)+y")) == Y

    def test_exp_product(self):
        s = simplify(parse("exp(x)*exp(x)"))
        assert s in (parse("exp(2*x)"), parse("exp(x)^2"))

    def test_cancellation(self):
        assert simplify(parse("(b+2)-b-2")) == Const(0)

    def test_deterministic(self):
        e = parse("y*x + x*y - 3*x*y + exp(x)*exp(y)")
        assert str(simplify(e)) == str(simplify(parse(str(e))))

    def test_preserves_values(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            e = random_expr(rng, 5)
            assert_same_values(e, simplify(e))


def assert_same_values(a, b, rel=1e-9):
    xs = np.linspace(0.35, 1.65, 9)
    ys = np.linspace(-0.9, 0.8, 9)
    fa, fb = compile_exprs([a], ENV), compile_exprs([b], ENV)
    for x, y in zip(xs, ys):
        try:
            (va,) = fa(np.array([x]), np.array([y]))
        except (DomainError, ZeroDivisionError):
            continue
        va = float(va[0])
        if not math.isfinite(va) or abs(va) > 1e8:
            continue
        (vb,) = fb(np.array([x]), np.array([y]))
        assert float(vb[0]) == pytest.approx(va, rel=rel, abs=1e-9)


def test_substitute_and_free_params():
    e = parse("a*x + exp(b*y)")
    assert free_params(e) == {"a", "b"}
    s = substitute(e, {"x": parse("x+1"), "a": parse("2")})
    assert free_params(s) == {"b"}
    assert evaluate(s, (1, 0), {"b": 0.5}) == pytest.approx(5)


def test_is_zero_detects_nonzero():
    assert not is_zero(parse("x - x + 1e-6"))
    assert is_zero(parse("sin(x)^2 + cos(x)^2 - 1"))


def test_derivative_property_1000_cases():
    fails, tried = derivative_property_failures(1000, seed=11)
    assert fails == 0
    assert tried < 5000


def test_parser_roundtrip():
    assert roundtrip_failures(200, seed=5) == 0


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_roundtrip_hypothesis(seed):
    e = random_expr(np.random.default_rng(seed), 6)
    assert_same_values(e, parse(str(e)), rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(-3, 3), st.floats(0.3, 1.7), st.floats(-1, 1))
def test_exp_derivative_scaling(b, x, y):
    e = parse("exp(b*x)*y")
    d = evaluate(diff(e, "x"), (x, y), {"b": b})
    assert d == pytest.approx(b * math.exp(b * x) * y, rel=1e-12, abs=1e-12)
