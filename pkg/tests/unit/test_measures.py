import math

import numpy as np
import pytest

from solver.config import DomainError, UsageError
from solver.measures import MatrixMeasure, combine, validate_coefficients
from solver.model import Atom, PiecewisePiece, RealInterval

from tests.fixtures.common_fixtures import linear_density


UNIT = RealInterval(0.0, 1.0)


class TestConstruction:

    def test_overlapping_pieces_rejected(self):
        first = PiecewisePiece.polynomial(0.0, 0.6, [np.eye(1)])
        second = PiecewisePiece.polynomial(0.5, 1.0, [np.eye(1)])
        with pytest.raises(DomainError, match="overlap"):
            MatrixMeasure((1, 1), UNIT, [first, second])

    def test_atom_outside_interval_rejected(self):
        with pytest.raises(DomainError):
            MatrixMeasure.point_masses([(1.5, 1.0)], UNIT)

    def test_atom_at_endpoint_rejected(self):
        with pytest.raises(DomainError):
            MatrixMeasure.point_masses([(0.0, 1.0)], UNIT)

    def test_wrong_atom_shape_rejected(self):
        with pytest.raises(DomainError):
            MatrixMeasure((2, 2), UNIT, atoms=[Atom(0.5, np.eye(3))])

    def test_zero_measure(self):
        m = MatrixMeasure.zero((2, 2), UNIT)
        assert m.is_zero
        assert m.breakpoints() == []


class TestEvaluation:

    def setup_method(self):
        self.m = MatrixMeasure(
            (1, 1),
            UNIT,
            [PiecewisePiece.polynomial(0.0, 1.0, [np.eye(1)])],
            [Atom(0.5, 2.0 * np.eye(1))],
        )

    def test_jump_and_density(self):
        assert self.m.jump(0.5)[0, 0] == 2.0
        assert self.m.jump(0.25)[0, 0] == 0.0
        assert self.m.density(0.25)[0, 0] == 1.0

    def test_jump_outside_interval(self):
        with pytest.raises(DomainError):
            self.m.jump(2.0)

    def test_antiderivative_sides_at_atom(self):
        left = self.m.antiderivative(0.5, "left")[0, 0]
        right = self.m.antiderivative(0.5, "right")[0, 0]
        balanced = self.m.antiderivative(0.5)[0, 0]
        assert left == pytest.approx(0.5, abs=1e-12)
        assert right == pytest.approx(2.5, abs=1e-12)
        assert balanced == pytest.approx(1.5, abs=1e-12)

    def test_unknown_side(self):
        with pytest.raises(UsageError):
            self.m.antiderivative(0.25, "middle")

    @pytest.mark.parametrize(
        "convention,expected",
        [("[]", 3.0), ("()", 3.0), ("[)", 3.0), ("(]", 3.0)],
    )
    def test_conventions_with_interior_atom(self, convention, expected):
        value = self.m.stieltjes_integrate(lambda x: np.eye(1), 0.0, 1.0, convention)
        assert value[0, 0] == pytest.approx(expected, abs=1e-10)

    @pytest.mark.parametrize(
        "convention,expected",
        [("[]", 2.0), ("[)", 0.0), ("(]", 0.0), ("()", 0.0)],
    )
    def test_conventions_at_atom_endpoint(self, convention, expected):
        value = self.m.stieltjes_integrate(lambda x: np.eye(1), 0.5, 0.5, convention)
        assert value[0, 0] == pytest.approx(expected, abs=1e-12)

    def test_reversed_range_rejected(self):
        with pytest.raises(UsageError):
            self.m.stieltjes_integrate(lambda x: np.eye(1), 1.0, 0.0)

    def test_unknown_convention_rejected(self):
        with pytest.raises(UsageError):
            self.m.stieltjes_integrate(lambda x: np.eye(1), 0.0, 1.0, "{}")

    def test_integrand_with_right_factor(self):
        value = self.m.stieltjes_integrate(lambda x: np.array([[x]]), 0.0, 1.0, "()", right=lambda x: np.array([[2.0]]))
        # ∫ 2x dx + 2 · 0.5 · 2
        assert value[0, 0] == pytest.approx(3.0, abs=1e-10)

    def test_variation_counts_atoms(self):
        assert self.m.variation(0.0, 1.0) == pytest.approx(3.0, abs=1e-10)

    def test_linear_density_integral(self):
        m = linear_density(UNIT, slope=2.0)
        assert m.integrate_density(0.0, 1.0)[0, 0] == pytest.approx(1.0, abs=1e-12)
        assert m.integrate_density(1.0, 0.0)[0, 0] == pytest.approx(-1.0, abs=1e-12)


def random_measure(rng, shape=(1, 1), atoms=3):
    """Three signed quadratic density pieces on the unit interval plus a few atoms."""
    cuts = [0.0, *sorted(rng.uniform(0.1, 0.9, 2)), 1.0]
    pieces = [
        PiecewisePiece.polynomial(lo, hi, [rng.normal(size=shape) for _ in range(3)])
        for lo, hi in zip(cuts[:-1], cuts[1:])
    ]
    locations = sorted(rng.uniform(0.05, 0.95, atoms))
    return MatrixMeasure(shape, UNIT, pieces, [Atom(x, rng.normal(size=shape)) for x in locations])


class TestRandomMeasures:

    @pytest.mark.parametrize("seed", range(10))
    def test_variation_is_additive(self, seed):
        rng = np.random.default_rng(seed)
        m = random_measure(rng, (2, 2))
        c, d, e = sorted(rng.uniform(0.01, 0.99, 3))
        assert m.atom_at(d) is None
        total = m.variation(c, e)
        assert m.variation(c, d) + m.variation(d, e) == pytest.approx(total, rel=1e-9, abs=1e-9)
        assert total >= sum(float(np.sum(np.abs(a.jump))) for a in m.atoms_in(c, e, "[]")) - 1e-12

    @pytest.mark.parametrize("seed", range(10))
    def test_integration_by_parts(self, seed):
        rng = np.random.default_rng(100 + seed)
        dF, dG = random_measure(rng), random_measure(rng)
        x1, x2 = sorted(rng.uniform(0.02, 0.98, 2))
        F = lambda x, side="balanced": dF.antiderivative(x, side)
        G = lambda x, side="balanced": dG.antiderivative(x, side)
        breaks = [a.location for a in (*dF.atoms, *dG.atoms)]

        # ∫_[x1,x2) F⁺ dG + G⁻ dF = (FG)⁻(x2) - (FG)⁻(x1)
        lhs = dG.stieltjes_integrate(lambda x: F(x, "right"), x1, x2, "[)", breaks=breaks)
        lhs = lhs + dF.stieltjes_integrate(lambda x: G(x, "left"), x1, x2, "[)", breaks=breaks)
        rhs = F(x2, "left") @ G(x2, "left") - F(x1, "left") @ G(x1, "left")
        assert lhs[0, 0] == pytest.approx(rhs[0, 0], abs=1e-8)


class TestRegularity:

    def test_finite_interval_is_regular(self):
        m = MatrixMeasure.constant(np.eye(1), UNIT)
        assert m.is_regular_at("a") and m.is_regular_at("b")

    def test_constant_density_to_infinity_is_singular(self):
        m = MatrixMeasure.constant(np.eye(1), RealInterval(0.0, math.inf))
        assert m.is_regular_at("a", anchor=1.0)
        assert not m.is_regular_at("b", anchor=1.0)

    def test_atoms_only_on_the_line_are_regular(self):
        m = MatrixMeasure.point_masses([(0.0, 1.0)], RealInterval(-math.inf, math.inf))
        assert m.is_regular_at("a") and m.is_regular_at("b")


class TestCombine:

    def test_linear_combination_with_left_factor(self):
        a = MatrixMeasure.constant(np.eye(2), UNIT)
        b = MatrixMeasure((2, 2), UNIT, atoms=[Atom(0.5, np.ones((2, 2)))])
        left = np.array([[0, 1], [1, 0]], dtype=complex)
        c = combine([(2.0, a), (-1.0, b)], left=left)
        assert np.allclose(c.density(0.25), 2 * left)
        assert np.allclose(c.jump(0.5), -left @ np.ones((2, 2)))
        assert c.pieces[0].coefficients is not None

    def test_mismatched_intervals(self):
        a = MatrixMeasure.constant(np.eye(1), UNIT)
        b = MatrixMeasure.constant(np.eye(1), RealInterval(0.0, 2.0))
        with pytest.raises(UsageError):
            combine([(1.0, a), (1.0, b)])

    def test_zero_jumps_are_dropped(self):
        a = MatrixMeasure.point_masses([(0.5, 1.0)], UNIT)
        c = combine([(1.0, a), (-1.0, a)])
        assert c.atoms == ()


class TestValidateCoefficients:

    def _measures(self, n=2):
        q = MatrixMeasure.zero((n, n), UNIT)
        w = MatrixMeasure.constant(np.eye(n), UNIT, hermitian=True, nonnegative=True)
        return q, w

    def test_canonical_system_passes(self):
        q, w = self._measures()
        report = validate_coefficients(q, w, [[0, -1], [1, 0]])
        assert report.ok

    def test_identity_is_not_skew_hermitian(self):
        q, w = self._measures()
        report = validate_coefficients(q, w, np.eye(2))
        assert not report.ok
        assert any("J not skew-Hermitian" in c.message for c in report.failures())

    def test_indefinite_w_rejected(self):
        q, _ = self._measures()
        w = MatrixMeasure.constant(np.diag([1.0, -1.0]), UNIT)
        report = validate_coefficients(q, w, [[0, -1], [1, 0]])
        assert [c.name for c in report.failures()] == ["w non-negative"]

    def test_non_hermitian_q_atom(self):
        _, w = self._measures()
        q = MatrixMeasure((2, 2), UNIT, atoms=[Atom(0.5, np.array([[0, 1], [0, 0]]))])
        report = validate_coefficients(q, w, [[0, -1], [1, 0]])
        assert "q Hermitian" in [c.name for c in report.failures()]

    def test_q_atom_making_2j_singular(self):
        _, w = self._measures(1)
        # 2J - Δq = 2i - 2i
        q = MatrixMeasure((1, 1), UNIT, atoms=[Atom(0.5, np.array([[2j]]))])
        report = validate_coefficients(q, w, [[1j]])
        names = [c.name for c in report.failures()]
        assert "2J±Δq invertible" in names
