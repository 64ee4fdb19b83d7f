from itertools import product

import numpy as np
import pytest

from projmetric.catalog import instantiate
from projmetric.expr import compile_exprs, is_zero, parse
from projmetric.flow import koenigs_metric, metric_13
from projmetric.geometry import Domain, Metric2, euclidean, sample_points
from projmetric.projective import (
    abcd_connection,
    abcd_flatness_pair,
    connection_from_spec,
    connection_of,
    field_,
    is_flat,
    jet_derivatives,
    jet_of,
    lie_derivative_lambda,
    liouville_invariants,
    liouville_values,
    prolonged_connection_at,
    symmetry_dimension_bound,
    symmetry_residual,
)

SL2 = [field_(0, 1), field_(1, "y"), field_("2*y", "1+y^2")]


def k_values(pc, s):
    return compile_exprs(list(pc.K), pc.env)(s.xs, s.ys)


@pytest.fixture
def s():
    return sample_points(Domain(), 40)


def test_flat_connection_is_zero(s):
    for v in k_values(connection_of(euclidean()), s):
        assert np.all(v == 0)


def test_metric13_connection(s):
    D = -0.8
    K = k_values(connection_of(metric_13(D)), s)
    assert np.allclose(K[0], 0, atol=1e-14)
    assert np.allclose(K[1], 0.5, atol=1e-14)
    assert np.allclose(K[2], 0, atol=1e-14)
    assert np.allclose(K[3], D * np.exp(-2 * s.xs), rtol=1e-12)


def test_2a_connection(s):
    K = k_values(connection_of(instantiate("2a", dict(eps1=1, eps2=1))), s)
    assert np.allclose(K[1], 0.5, atol=1e-14)
    assert np.allclose(K[3], -0.5 * np.exp(-2 * s.xs), rtol=1e-12)


@pytest.mark.parametrize("D", [-0.5, 0.3, 2.0])
@pytest.mark.parametrize("Z", SL2, ids=str)
def test_sl2_fields_are_symmetries(D, Z, s):
    assert symmetry_residual(connection_of(metric_13(D)), Z, s).max_abs <= 1e-10


@pytest.mark.parametrize("A,B,C,D", [(1, 2, -1, 0.5), (0, -1, 3, 2)])
def test_translation_field_on_abcd(A, B, C, D, s):
    assert symmetry_residual(abcd_connection(A, B, C, D), field_(0, 1), s).max_abs <= 1e-10


def test_koenigs_rotation_like_field_fails(s):
    assert symmetry_residual(connection_of(koenigs_metric()), field_("y", 0), s).max_abs > 0.1


def test_residual_linear_in_field(s):
    pc = connection_of(koenigs_metric())
    z1 = field_("x*y", "y^2")
    r1 = symmetry_residual(pc, z1, s).max_abs
    r2 = symmetry_residual(pc, field_("3*x*y", "3*y^2"), s).max_abs
    assert r2 == pytest.approx(3 * r1, rel=1e-12)
    assert symmetry_residual(pc, field_(0, 0), s).max_abs == 0


def test_zero_connection_liouville():
    L = liouville_invariants(connection_from_spec("K0 = 0\nK1 = 0\nK2 = 0\nK3 = 0\n"))
    assert is_zero(L.L1) and is_zero(L.L2)


def test_1a_not_flat(s):
    L1, L2 = liouville_values(connection_of(instantiate("1a", dict(b=3, eps1=1, eps2=1))), s)
    assert max(np.max(np.abs(L1)), np.max(np.abs(L2))) > 1e-3


@pytest.mark.parametrize(
    "g,flat",
    [
        (euclidean(), True),
        (Metric2(parse("1/(1+x^2+y^2)^2"), 0, parse("1/(1+x^2+y^2)^2")), True),
        (Metric2(parse("1/(1-x^2-y^2)^2"), 0, parse("1/(1-x^2-y^2)^2"), domain=Domain(-0.5, 0.5, -0.5, 0.5)), True),
        (instantiate("2a", dict(eps1=1, eps2=1)), False),
        (koenigs_metric(), False),
    ],
)
def test_is_flat(g, flat):
    assert is_flat(connection_of(g)) is flat


def test_abcd_invariants_match_pair(s):
    # the connection's own invariants are the oracle for the closed-form pair
    xs = s.xs
    for A, B, C, D in product((-1.0, 0.5, 2.0), repeat=4):
        L1, L2 = liouville_values(abcd_connection(A, B, C, D), s)
        e1, e2 = abcd_flatness_pair(A, B, C, D)
        assert np.allclose(L2, 2 * (3 * B * D - C * C - 6 * D) * np.exp(-2 * xs), atol=1e-12)
        assert np.allclose(L2, e1 * np.exp(-2 * xs), atol=1e-12)
        assert np.allclose(L1, e2 * np.exp(-xs), atol=1e-12)


def test_lie_derivative_lambda_vanishes_for_symmetry(s):
    pc = connection_of(metric_13(-0.5))
    for Z in SL2:
        for e in lie_derivative_lambda(pc, Z):
            (v,) = compile_exprs([e], pc.env)(s.xs, s.ys)
            assert np.max(np.abs(v)) < 1e-10


class TestProlongation:
    def test_flat_translation_jet_constant(self):
        pc = connection_of(euclidean())
        smp = prolonged_connection_at(pc, (0.7, 0.2))
        Zh = jet_of(field_(0, 1), (0.7, 0.2))
        assert np.allclose(Zh @ smp.X, 0, atol=1e-12)
        assert np.allclose(Zh @ smp.Y, 0, atol=1e-12)
        assert smp.curvature_norm < 1e-8

    @pytest.mark.parametrize("Z", SL2, ids=str)
    def test_jet_transport_matches_symbolic(self, Z):
        pc = connection_of(metric_13(-0.5))
        for p in ((0.5, -0.3), (1.2, 0.6)):
            smp = prolonged_connection_at(pc, p)
            Zh = jet_of(Z, p, pc.env)
            dx, dy = jet_derivatives(Z, p, pc.env)
            assert np.allclose(dx, Zh @ smp.X, atol=1e-5)
            assert np.allclose(dy, Zh @ smp.Y, atol=1e-5)

    def test_finite_difference_of_jet(self):
        pc = connection_of(metric_13(-0.5))
        Z, p, h = SL2[2], (0.9, 0.1), 1e-5
        fd = (jet_of(Z, (p[0] + h, p[1])) - jet_of(Z, (p[0] - h, p[1]))) / (2 * h)
        Zh = jet_of(Z, p)
        assert np.allclose(fd, Zh @ prolonged_connection_at(pc, p).X, atol=1e-5)

    def test_curvature_rank(self):
        smp = prolonged_connection_at(connection_of(metric_13(-0.5)), (0.9, 0.1))
        assert smp.curvature_rank() >= 1

    @pytest.mark.parametrize(
        "pc,expected",
        [
            (connection_of(euclidean()), "=8"),
            (connection_of(Metric2(parse("1/(1+x^2+y^2)^2"), 0, parse("1/(1+x^2+y^2)^2"))), "=8"),
            (connection_of(metric_13(-0.5)), "<8"),
            (connection_of(instantiate("1a", dict(b=3, eps1=1, eps2=1))), "<8"),
        ],
    )
    def test_dimension_bound(self, pc, expected):
        assert symmetry_dimension_bound(pc, pc.samples(8)) == expected
