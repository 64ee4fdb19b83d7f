import numpy as np
import pytest

from projmetric.acceptance import CATALOG_CHOICES
from projmetric.catalog import IDS, instantiate
from projmetric.errors import IndeterminateError, InvalidParameterError
from projmetric.expr import compile_exprs
from projmetric.geometry import Domain, euclidean, sample_points
from projmetric.liouville import (
    ABCDConnection,
    QuadraticForm,
    build_ode_system,
    decide_rank,
    family_tangent_space,
    general_solution_family,
    lin1_residual,
    max_subspace_angle,
    metric_from_mobility,
    mobility_matrix,
    ode_residual,
    reassembly_residual,
    solution_space,
    solution_space_dimension,
)
from projmetric.projective import abcd_connection, connection_of


@pytest.fixture
def s():
    return sample_points(Domain(), 30)


def vals(form, env, s):
    return compile_exprs(form.components(), env)(s.xs, s.ys)


class TestMobilityMatrix:
    def test_flat_is_identity(self, s):
        a11, a12, a22 = vals(mobility_matrix(euclidean()), {}, s)
        assert np.allclose(a11, 1) and np.allclose(a12, 0) and np.allclose(a22, 1)

    def test_2a(self, s):
        g = instantiate("2a", dict(eps1=1, eps2=1))
        a11, a12, a22 = vals(mobility_matrix(g), g.env, s)
        assert np.allclose(a11, np.exp(s.xs / 3), rtol=1e-12)
        assert np.allclose(a22, np.exp(-5 * s.xs / 3), rtol=1e-12)

    def test_negative_determinant_stays_real(self, s):
        g = instantiate("2a", dict(eps1=1, eps2=-1))
        a = mobility_matrix(g)
        (d,) = compile_exprs([a.det], g.env)(s.xs, s.ys)
        assert np.all(np.isreal(d)) and np.all(d < 0)

    @pytest.mark.parametrize("id_", IDS)
    def test_lin1_against_own_connection(self, id_):
        g = instantiate(id_, CATALOG_CHOICES[id_])
        assert lin1_residual(connection_of(g), mobility_matrix(g), g.samples()).max_abs <= 1e-8

    def test_perturbation_detected(self, s):
        g = instantiate("2a", dict(eps1=1, eps2=1))
        a = mobility_matrix(g)
        bad = QuadraticForm(a.a11 + 0.01, a.a12, a.a22)
        assert lin1_residual(connection_of(g), bad, s).max_abs > 1e-4

    def test_identity_flat(self, s):
        pc = connection_of(euclidean())
        assert lin1_residual(pc, QuadraticForm(1, 0, 1), s).max_abs == 0

    def test_round_trip(self, s):
        g = instantiate("1b", dict(a=2, b=3, eps1=1, eps2=1))
        h = metric_from_mobility(mobility_matrix(g), g.env, g.domain)
        s = g.samples(30)
        for u, v in zip(compile_exprs([g.E, g.F, g.G], g.env)(s.xs, s.ys), compile_exprs([h.E, h.F, h.G], g.env)(s.xs, s.ys)):
            assert np.allclose(u, v, rtol=1e-10, atol=1e-14)


class TestFamily:
    def test_identity_gives_flat(self, s):
        g = metric_from_mobility(QuadraticForm(1, 0, 1))
        E, F, G = compile_exprs([g.E, g.F, g.G])(s.xs, s.ys)
        assert np.allclose(E, 1) and np.allclose(F, 0) and np.allclose(G, 1)

    def test_generic_branch(self, s):
        B, D, lam = -0.5, 1.3, 2.0
        a11, a12, a22 = vals(general_solution_family(B, D, lam), {}, s)
        x = s.xs
        assert np.allclose(a11, lam * np.exp(2 * B * x / 3), rtol=1e-13)
        assert np.allclose(a22, lam * D / (B - 1) * np.exp(2 * (B - 1) * x) * np.exp(-4 * B * x / 3), rtol=1e-13)
        assert np.all(a12 == 0)

    def test_resonant_branch(self, s):
        a11, _, a22 = vals(general_solution_family(1, 1), {}, s)
        assert np.allclose(a11, np.exp(2 * s.xs / 3), rtol=1e-13)
        assert np.allclose(a22, 2 * s.xs * np.exp(-4 * s.xs / 3), rtol=1e-13)

    @pytest.mark.parametrize("B,D,lam,H", [(-1, 1, 1, 0), (-0.5, 2, 3, 1.5), (3, -1, 0.5, -2), (1, 1, 1, 1), (0.25, 0.7, -1, 4)])
    def test_family_solves_lin1(self, B, D, lam, H, s):
        pc = abcd_connection(0, B, 0, D)
        assert lin1_residual(pc, general_solution_family(B, D, lam, H), s).max_abs <= 1e-8

    def test_family_metric_is_1a_shape(self, s):
        # for H=0 the metric is diagonal with E, G pure exponentials in x
        B, D = -1.0, 1.0
        g = metric_from_mobility(general_solution_family(B, D))
        E, _, G = compile_exprs([g.E, g.F, g.G])(s.xs, s.ys)
        rE = np.polyfit(s.xs, np.log(np.abs(E)), 1)
        rG = np.polyfit(s.xs, np.log(np.abs(G)), 1)
        b = 2 * (1 - B)
        assert rE[0] == pytest.approx(b + 2, abs=1e-10)
        assert rG[0] == pytest.approx(b, abs=1e-10)

    def test_bad_parameters(self):
        with pytest.raises(InvalidParameterError):
            general_solution_family(-1, 1, lam=0)
        with pytest.raises(InvalidParameterError):
            general_solution_family(-1, 0)


class TestCoefficientSystem:
    def test_zero_connection_matrix_is_constant(self):
        sys = build_ode_system(ABCDConnection(0, 0, 0, 0), 3)
        assert np.array_equal(sys.M(0.3), sys.M(1.9))
        M = sys.M(0.0)
        assert M[3, 0] == 0 and M[3, 1] == -1 and M[4, 2] == -2

    def test_case1_constraint_diagonal(self):
        C = 2.0
        al = (0.0, 1.0, -1.0)
        sys = build_ode_system(ABCDConnection(0, 0, C, 0), 1, al)
        T = sys.T(0.8)
        assert np.allclose(np.diag(T), [a + 2 / 3 * C * np.exp(-0.8) for a in al])

    def test_coupling(self):
        sys = build_ode_system(ABCDConnection(0, 0, 0, 1.5), 3)
        W = sys.constraint_rows(0.4)
        assert np.allclose(W[:, 3:6], -1.5 * np.exp(-0.8) * np.eye(3))

    def test_case_validation(self):
        with pytest.raises(InvalidParameterError):
            build_ode_system(ABCDConnection(0, 0, 1, 0), 1, (0, 0, 1))
        with pytest.raises(InvalidParameterError):
            build_ode_system(ABCDConnection(0, 0, 1, 0), 1, (0, 1j, 2j))


class TestDimensions:
    @pytest.mark.parametrize(
        "abcd,case,al,want",
        [
            ((0, 0, 1, 0), 3, 0.0, 0),
            ((0, 0, 1, 0), 1, (0, 1, -1), 0),
            ((0, 0, 1, 0), 2, (1, 0), 0),
            ((1, 0, 0, 1), 3, 0.0, 0),
            ((0, -1, 0, 1), 3, 0.0, 2),
            ((0, 1, 0, 1), 3, 0.0, 2),
        ],
    )
    def test_lemma(self, abcd, case, al, want):
        assert solution_space_dimension(build_ode_system(ABCDConnection(*abcd), case, al)) == want

    @pytest.mark.parametrize("B", [-1.0, -0.5, 3.0])
    def test_space_is_family(self, B):
        sp = solution_space(build_ode_system(ABCDConnection(0, B, 0, 1), 3))
        assert sp.dimension == 2
        assert max_subspace_angle(sp.basis, family_tangent_space(B, 1, sp.x0)) < 1e-6
        assert ode_residual(sp) < 1e-6
        assert reassembly_residual(sp) < 1e-6

    def test_rank_gap(self):
        assert decide_rank(np.array([1.0, 0.5, 1e-12])) == 2
        with pytest.raises(IndeterminateError):
            decide_rank(np.array([1.0, 1e-6, 1e-8]))

    def test_half_b_constraint_sign(self):
        # B = 1/2 is where the two signs of the constraint super-diagonal disagree
        abcd = ABCDConnection(0, 0.5, 0, 1)
        derived = solution_space(build_ode_system(abcd, 3))
        displayed = solution_space(build_ode_system(abcd, 3, displayed_constraint=True))
        assert derived.dimension == 4
        assert displayed.dimension == 2
        assert reassembly_residual(derived) < 1e-6
