from itertools import combinations

import numpy as np
import pytest

from projmetric.acceptance import DISTINGUISH_GRID
from projmetric.catalog import (
    IDS,
    distinguish,
    fingerprint,
    instantiate,
    killing_field,
    killing_residual,
    projective_fields,
    translation_fit,
    validate,
)
from projmetric.errors import InvalidParameterError
from projmetric.expr import compile_exprs
from projmetric.flow import metric_13
from projmetric.geometry import euclidean
from projmetric.projective import connection_of, field_, symmetry_residual

XS = np.array([0.4, 0.9, 1.5])
YS = np.array([-0.5, 0.2, 0.7])


def comps(g):
    return compile_exprs([g.E, g.F, g.G], g.env)(XS, YS)


def test_1a_components():
    E, F, G = comps(instantiate("1a", dict(b=3, eps1=1, eps2=1)))
    assert np.allclose(E, np.exp(5 * XS), rtol=1e-14)
    assert np.all(F == 0)
    assert np.allclose(G, np.exp(3 * XS), rtol=1e-14)


def test_2c_components():
    E, _, G = comps(instantiate("2c", dict(a=1, c=0, eps1=1, eps2=1)))
    q = 2 * XS**2 + 1
    assert np.allclose(E, 1 / (q**2 * XS), rtol=1e-14)
    assert np.allclose(G, XS / q, rtol=1e-14)


@pytest.mark.parametrize(
    "id_,params,msg",
    [
        ("1a", dict(b=1, eps1=1, eps2=1), "b ∉ {−2, 0, 1}"),
        ("1a", dict(b=-2, eps1=1, eps2=1), "b ∉ {−2, 0, 1}"),
        ("1a", dict(b=3, eps1=2, eps2=1), "eps1"),
        ("1c", dict(a=0, eps=1), "a"),
        ("2b", dict(a=1, eps1=1), "eps2"),
        ("3z", dict(), "unknown"),
    ],
)
def test_validation(id_, params, msg):
    with pytest.raises(InvalidParameterError, match=msg):
        validate(id_, params)


def test_killing_field():
    assert killing_field("2a") == field_(0, 1)
    g = instantiate("2a", dict(eps1=1, eps2=1))
    assert killing_residual(g, field_(0, 1)) <= 1e-10
    assert killing_residual(g, field_(1, "y")) > 1e-3
    assert killing_residual(metric_13(-0.5), field_(0, 1)) == 0
    assert killing_residual(euclidean(), field_(0, 1)) == 0
    assert killing_residual(euclidean(), field_("x", 0)) == pytest.approx(2)


@pytest.mark.parametrize("id_", IDS)
def test_projective_fields(id_):
    from projmetric.acceptance import CATALOG_CHOICES

    p = CATALOG_CHOICES[id_]
    pc = connection_of(instantiate(id_, p))
    fields = projective_fields(id_, p)
    for Z in fields:
        if id_ == "2c" and Z == field_(1, "y"):
            continue
        assert symmetry_residual(pc, Z).max_abs <= 1e-8, str(Z)


@pytest.mark.parametrize("eps", [(1, 1), (1, -1), (-1, 1), (-1, -1)])
def test_2c_sl2_fields(eps):
    p = dict(a=1.5, c=0.5, eps1=eps[0], eps2=eps[1])
    pc = connection_of(instantiate("2c", p))
    for Z in projective_fields("2c", p):
        assert symmetry_residual(pc, Z).max_abs <= 1e-9


def test_2b_curvature_display():
    a, e2 = 2.0, 1.0
    fp = fingerprint("2b", dict(a=a, eps1=1, eps2=e2))
    x = np.array(fp.probes)
    assert np.allclose(fp.values[0], e2 * (3 * np.exp(x) + 2 * e2) / (2 * a * np.exp(3 * x)), rtol=1e-10)


def test_2c_values_at_zero():
    # R₀ agrees with the display; ΔR₀ is 6ε₂³/a² rather than 2ε₂³/a² (see the ledger)
    for a, c, e2 in ((1, 1, 1), (2, -7, -1), (0.5, 3, 1)):
        R0, dR0 = fingerprint("2c", dict(a=a, c=c, eps1=1, eps2=e2)).at_zero
        assert R0 == pytest.approx(e2 * c / (2 * a), abs=1e-10)
        assert dR0 == pytest.approx(6 * e2**3 / a**2, abs=1e-9)


def test_2c_curve_injective_in_c():
    # distinct c give distinct (R₀, ΔR₀) for fixed a, ε₂
    pts = [fingerprint("2c", dict(a=1, c=c, eps1=1, eps2=1)).at_zero for c in np.linspace(-3, 3, 7)]
    for (p, q) in combinations(pts, 2):
        assert abs(p[0] - q[0]) > 1e-3


class TestDistinguish:
    def test_2a_vs_2b(self):
        v = distinguish("2a", dict(eps1=1, eps2=1), "2b", dict(a=1, eps1=1, eps2=1))
        assert v.kind == "distinct" and v.witness == "I/(9R^3)"
        assert str(v) == "distinct: I/(9R^3)"

    def test_2c_by_value_at_zero(self):
        v = distinguish("2c", dict(a=1, c=1, eps1=1, eps2=1), "2c", dict(a=1, c=2, eps1=1, eps2=1))
        assert v.witness == "R at x=0"

    def test_identical(self):
        p = dict(b=3, eps1=1, eps2=1)
        assert distinguish("1a", p, "1a", dict(p)).kind == "identical"

    def test_signature(self):
        v = distinguish("1a", dict(b=3, eps1=1, eps2=1), "1a", dict(b=3, eps1=1, eps2=-1))
        assert v.witness == "signature"

    def test_dimension_witness(self):
        v = distinguish("1a", dict(b=3, eps1=1, eps2=1), "2a", dict(eps1=1, eps2=1))
        assert v.witness == "dim p"

    def test_symmetric_on_grid(self):
        grid = DISTINGUISH_GRID[::2] + DISTINGUISH_GRID[1:4]
        for (ia, pa), (ib, pb) in combinations(grid, 2):
            assert distinguish(ia, pa, ib, pb).witness == distinguish(ib, pb, ia, pa).witness


def test_translation_fit_recovers_shift():
    f = lambda x: np.exp(-2 * x) + x**2
    g = lambda x: f(x + 0.37)
    x0, res = translation_fit(f, g)
    assert abs(abs(x0) - 0.37) < 1e-6
    assert res < 1e-8
