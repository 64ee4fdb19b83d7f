import numpy as np
import pytest

from projmetric.acceptance import family_pair
from projmetric.catalog import instantiate, killing_residual
from projmetric.errors import PreconditionError
from projmetric.expr import compile_exprs
from projmetric.flow import (
    equivalence_integral,
    evaluation_rank,
    integrate_batch,
    integrate_geodesic,
    integral_drift,
    eliminate_time,
    is_integral,
    killing_square,
    killing_tensor_residual,
    knebelman_map,
    koenigs_metric,
    koenigs_suite,
    metric_13,
    metric_form,
    projective_equivalence_check,
    random_states,
    superintegrable_suite,
    transfer_integral,
    zf_map,
)
from projmetric.geometry import Domain, euclidean
from projmetric.liouville import QuadraticForm
from projmetric.projective import connection_of, field_, symmetry_residual

K = field_(0, 1)


def test_flat_straight_line():
    g = euclidean(Domain(-1, 2, -1, 1))
    tr = integrate_geodesic(g, (0, 0, 1, 0), 1.0)
    end = tr.single(0)[-1]
    assert np.allclose(end, [1, 0, 1, 0], atol=1e-12)


def test_clipping_is_reported():
    g = euclidean()
    tr = integrate_geodesic(g, (1.6, 0, 1, 0), 1.0)
    assert tr.clipped[0]
    assert tr.valid[0] < len(tr.t)


def test_energy_richardson():
    g = koenigs_metric()
    s0 = random_states(g, 4, seed=3)
    F0 = metric_form(g)
    d1 = integral_drift(integrate_batch(g, s0, 5.0, 1e-3), F0)
    d2 = integral_drift(integrate_batch(g, s0, 5.0, 5e-4), F0)
    assert d1 <= 1e-7
    # fourth-order scheme: halving the step shrinks the error (or it is at round-off)
    assert d2 <= max(d1 / 4, 1e-12)


def test_time_elimination_matches_connection():
    D = -0.5
    g = metric_13(D)
    tr = integrate_geodesic(g, (0.6, 0.0, 0.3, 0.1), 2.0, 1e-3)
    x, y, yp, ypp = eliminate_time(tr)
    rhs = 0.5 * yp + D * np.exp(-2 * x) * yp**3
    inner = slice(5, len(x) - 5)
    assert np.max(np.abs(ypp[inner] - rhs[inner])) < 1e-6


class TestIntegrals:
    def test_metric_is_integral(self):
        for g in (koenigs_metric(), metric_13(-0.5), instantiate("1b", dict(a=2, b=3, eps1=1, eps2=1))):
            tr = integrate_batch(g, random_states(g, 5, 1), 2.0)
            assert integral_drift(tr, metric_form(g), g.env) <= 1e-7

    def test_koenigs(self):
        g, S = koenigs_suite()
        tr = integrate_batch(g, random_states(g, 10, 0), 3.0)
        for lab, F in S:
            assert integral_drift(tr, F) <= 1e-6, lab
            assert is_integral(g, F)
        dx2 = QuadraticForm(1, 0, 0)
        assert integral_drift(tr, dx2) > 1e-2
        assert not is_integral(g, dx2)

    def test_superintegrable_verified(self):
        g, S = superintegrable_suite(-0.5)
        tr = integrate_batch(g, random_states(g, 10, 0), 3.0)
        for lab, F in S:
            assert integral_drift(tr, F, S.env) <= 1e-6, lab
        assert evaluation_rank(S.forms, S.env) == 4

    def test_displayed_variants_drift(self):
        g, S = superintegrable_suite(-0.5, variant="displayed")
        tr = integrate_batch(g, random_states(g, 10, 0), 3.0)
        drift = dict((lab, integral_drift(tr, F, S.env)) for lab, F in S)
        assert drift["F2"] > 1e-3 and drift["F3"] > 1e-3

    def test_symbolic_and_drift_agree(self):
        g, S = superintegrable_suite(0.7)
        for _, F in S:
            assert killing_tensor_residual(g, F, env=S.env) < 1e-10


class TestEquivalence:
    def test_self(self):
        g = koenigs_metric()
        assert projective_equivalence_check(g, g).equivalent

    def test_family_pair(self):
        g, gb = family_pair(-1.0, 1.0, 1.0)
        assert projective_equivalence_check(g, gb).max_drift <= 1e-6

    def test_inequivalent(self):
        rep = projective_equivalence_check(instantiate("1a", dict(b=3, eps1=1, eps2=1)), euclidean())
        assert rep.max_drift > 1e-3
        assert not rep

    def test_integral_of_self_is_energy(self):
        g = koenigs_metric()
        I = equivalence_integral(g, g)
        xs, ys = np.array([0.5, 1.0]), np.array([0.1, -0.2])
        a = I.evaluate(xs, ys)
        b = compile_exprs([g.E, g.F, g.G])(xs, ys)
        assert np.allclose(a, b, rtol=1e-12)


class TestMaps:
    def test_knebelman_self_is_identity(self):
        g = metric_13(-0.5)
        Kb = knebelman_map(g, g, K)
        xs, ys = np.array([0.5, 1.3]), np.array([0.0, 0.4])
        v = compile_exprs(list(Kb.components))(xs, ys)
        assert np.allclose(v[0], 0) and np.allclose(v[1], 1)

    def test_knebelman_family(self):
        g, gb = family_pair(-1.0, 1.0, 1.0)
        Kb = knebelman_map(g, gb, K)
        assert str(Kb.Z1) == "0"
        assert killing_residual(gb, Kb) <= 1e-6

    def test_knebelman_preconditions(self):
        g = instantiate("2a", dict(eps1=1, eps2=1))
        with pytest.raises(PreconditionError):
            knebelman_map(g, g, field_(1, "y"))
        with pytest.raises(PreconditionError):
            knebelman_map(instantiate("1a", dict(b=3, eps1=1, eps2=1)), euclidean(), K)

    def test_zf_of_metric_is_killing(self):
        g = metric_13(-0.5)
        Z = zf_map(g, K, metric_form(g))
        v = compile_exprs(list(Z.components), g.env)(np.array([0.7]), np.array([0.2]))
        assert np.allclose([v[0][0], v[1][0]], [0, 1])

    def test_zf_kernel(self):
        g = metric_13(-0.5)
        Z = zf_map(g, K, killing_square(g, K))
        assert str(Z.Z1) == "0" and str(Z.Z2) == "0"

    def test_zf_images_are_symmetries(self):
        g, S = superintegrable_suite(-0.5)
        pc = connection_of(g)
        for lab, F in S:
            assert symmetry_residual(pc, zf_map(g, K, F)).max_abs <= 1e-6, lab

    def test_zf_linearity(self):
        g, S = superintegrable_suite(-0.5)
        H, F1, F2, F3 = S.forms
        xs, ys = np.linspace(0.4, 1.6, 6), np.linspace(-0.8, 0.8, 6)
        for al, be in ((1.0, 1.0), (2.5, -0.3), (-1.0, 4.0)):
            lhs = zf_map(g, K, F3 * al + F2 * be).components
            r1, r2 = zf_map(g, K, F3).components, zf_map(g, K, F2).components
            v = compile_exprs(list(lhs) + list(r1) + list(r2), S.env)(xs, ys)
            for i in range(2):
                assert np.allclose(v[i], al * v[2 + i] + be * v[4 + i], atol=1e-9)

    def test_zf_precondition(self):
        g = metric_13(-0.5)
        with pytest.raises(PreconditionError):
            zf_map(g, K, QuadraticForm(1, 0, 0))

    def test_transfer(self):
        g, gb = family_pair(-0.5, 1.0, 2.0)
        h = transfer_integral(g, gb, metric_form(g))
        assert killing_tensor_residual(gb, h) <= 1e-8
        tr = integrate_batch(gb, random_states(gb, 5, 2), 3.0)
        assert integral_drift(tr, h, gb.env) <= 1e-6

    def test_transfer_self_identity(self):
        g = koenigs_metric()
        h = transfer_integral(g, g, metric_form(g))
        xs, ys = np.array([0.5]), np.array([0.3])
        assert np.allclose(h.evaluate(xs, ys), compile_exprs([g.E, g.F, g.G])(xs, ys))

    def test_transfer_precondition(self):
        g, gb = family_pair(-0.5, 1.0, 2.0)
        with pytest.raises(PreconditionError):
            transfer_integral(g, gb, QuadraticForm(1, 0, 0))
