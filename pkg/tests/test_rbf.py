import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ratedouble import rbf


@pytest.fixture
def tps():
    return rbf.thin_plate()


def constrained(pts, rng, order=2):
    return rbf.project_moments(pts, rng.standard_normal(pts.shape[0]), order)


class TestBases:
    def test_thin_plate_at_zero(self, tps):
        assert tps(np.zeros((1, 2)))[0] == 0.0
        y = np.array([[1e-5, 0.0], [0.3, 0.4], [2.0, 1.0]])
        r = np.linalg.norm(y, axis=1)
        assert np.all(np.abs(tps(y)) <= r ** 2 * np.abs(np.log(r)) + 1e-300)

    @pytest.mark.parametrize("name", ["thin_plate", "gaussian", "inverse_multiquadric"])
    def test_even(self, name, rng):
        basis = rbf.make_basis(name)
        y = rng.standard_normal((20, 2))
        np.testing.assert_allclose(basis(y), basis(-y))

    def test_orders(self):
        assert rbf.thin_plate().order == 2
        assert rbf.gaussian().order == 0
        with pytest.raises(ValueError):
            rbf.make_basis("no_such_basis")

    def test_monomial_order(self):
        np.testing.assert_array_equal(rbf.monomial_exponents(2, 3),
                                      [[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]])
        assert rbf.monomial_exponents(2, 0).shape == (0, 2)


class TestUnisolvency:
    def test_triangle(self):
        ok, xi = rbf.unisolvency_check(2, 2, [[0, 0], [1, 0], [0, 1]])
        assert ok and xi.shape == (3, 2)

    def test_collinear(self):
        ok, _ = rbf.unisolvency_check(2, 2, [[0, 0], [0.5, 0.5], [1, 1]])
        assert not ok

    def test_constants(self):
        assert rbf.unisolvency_check(1, 1, [[0.3]])[0]

    def test_no_polynomials(self):
        ok, xi = rbf.unisolvency_check(2, 0, [[0.1, 0.2]])
        assert ok and xi.size == 0

    def test_lagrange(self, rng):
        pspace = rbf.PolySpace.from_points(2, 2, rng.random((15, 2)))
        np.testing.assert_allclose(pspace.lagrange(pspace.xi), np.eye(3), atol=1e-10)


class TestFit:
    def test_polynomial_reproduction(self, tps, rng):
        pts = rng.random((10, 2))
        p = lambda X: 1 + 2 * X[..., 0] - X[..., 1]
        s = rbf.fit_rbf(tps, pts, p(pts))
        assert np.linalg.norm(s.coeffs) <= 1e-8 * np.linalg.norm(p(pts))
        X = rng.random((100, 2))
        np.testing.assert_allclose(s(X), p(X), atol=1e-8)

    def test_interpolation(self, tps, rng):
        pts = rng.random((25, 2))
        f = rng.standard_normal(25)
        s = rbf.fit_rbf(tps, pts, f)
        assert np.max(np.abs(s(pts) - f)) <= 1e-8
        assert s.moment_residual() <= 1e-8 * np.linalg.norm(s.coeffs)

    def test_gaussian_has_no_polynomial(self, rng):
        pts = rng.random((8, 2))
        s = rbf.fit_rbf(rbf.gaussian(3.0), pts, rng.standard_normal(8))
        assert s.poly.size == 0

    def test_collinear_nodes_rejected(self, tps):
        with pytest.raises(rbf.NotUnisolvent):
            rbf.fit_rbf(tps, [[0, 0], [0.5, 0.5], [1, 1]], [1.0, 2.0, 3.0])

    def test_duplicates_rejected(self, tps):
        with pytest.raises(ValueError):
            rbf.fit_rbf(tps, [[0, 0], [1, 0], [0, 1], [0, 0]], [1.0, 2.0, 3.0, 4.0])


class TestQuadraticForm:
    def test_zero(self, tps):
        assert rbf.cpd_quadratic_form(tps, np.eye(2), np.zeros(2)) == 0.0

    def test_square(self, tps):
        pts = np.array([[0, 0], [1, 0], [0, 1], [1, 1]], dtype=float)
        # only the diagonals (length sqrt 2) survive: -2 * 2 * (2 log sqrt 2)
        val = rbf.cpd_quadratic_form(tps, pts, [1, -1, -1, 1])
        assert val == pytest.approx(4 * math.log(2))
        assert val > 0

    def test_unconstrained_rejected(self, tps):
        with pytest.raises(rbf.MomentViolation):
            rbf.cpd_quadratic_form(tps, np.eye(3)[:, :2], [1.0, 0.0, 0.0])

    @given(st.integers(0, 10 ** 6))
    @settings(max_examples=30, deadline=None)
    def test_positive(self, seed):
        rng = np.random.default_rng(seed)
        pts = rng.random((12, 2))
        assert rbf.cpd_quadratic_form(rbf.thin_plate(), pts, constrained(pts, rng)) > 0
        a = rng.standard_normal(12)
        assert rbf.cpd_quadratic_form(rbf.gaussian(2.0), pts, a) > 0


class TestNativeSpace:
    def test_k_phi_annihilation(self, tps, rng):
        pspace = rbf.PolySpace.from_points(2, 2, rng.random((20, 2)))
        Y = rng.random((100, 2))
        assert np.max(np.abs(rbf.k_phi(tps, pspace, pspace.xi, Y))) <= 1e-9

    def test_k_phi_symmetric(self, tps, rng):
        pspace = rbf.PolySpace.from_points(2, 2, rng.random((20, 2)))
        X, Y = rng.random((10, 2)), rng.random((10, 2))
        np.testing.assert_allclose(rbf.k_phi(tps, pspace, X, Y), rbf.k_phi(tps, pspace, Y, X).T,
                                   atol=1e-12)

    def test_k_phi_without_polynomials(self, rng):
        basis = rbf.gaussian()
        pspace = rbf.PolySpace.from_points(2, 0, rng.random((5, 2)))
        X, Y = rng.random((4, 2)), rng.random((3, 2))
        np.testing.assert_allclose(rbf.k_phi(basis, pspace, X, Y), basis.matrix(X, Y))

    def test_polynomial_inner(self, tps, rng):
        pspace = rbf.PolySpace.from_points(2, 2, rng.random((20, 2)))
        p = rbf.RbfFunction(tps, np.zeros((0, 2)), np.zeros(0), [0.5, -1.0, 2.0], 2)
        vals = p(pspace.xi)
        assert rbf.native_inner(tps, pspace, p, p) == pytest.approx(vals @ vals)

    def test_orthogonal_to_vanishing_polynomial(self, tps, rng):
        pts = rng.random((20, 2))
        pspace = rbf.PolySpace.from_points(2, 2, pts)
        f = rbf.RbfFunction(tps, pts, constrained(pts, rng), np.zeros(3), 2)
        zero = rbf.RbfFunction(tps, np.zeros((0, 2)), np.zeros(0), np.zeros(3), 2)
        assert rbf.native_inner(tps, pspace, f, zero) == 0.0

    def test_norm_positive(self, tps, rng):
        pts = rng.random((15, 2))
        pspace = rbf.PolySpace.from_points(2, 2, pts)
        for _ in range(50):
            f = rbf.RbfFunction(tps, pts, constrained(pts, rng), rng.standard_normal(3), 2)
            assert rbf.native_inner(tps, pspace, f, f) > 0

    def test_reproducing(self, tps, rng):
        pts = rng.random((15, 2))
        pspace = rbf.PolySpace.from_points(2, 2, pts)
        f = rbf.RbfFunction(tps, pts, constrained(pts, rng), rng.standard_normal(3), 2)
        for x in rng.random((5, 2)):
            sec = rbf.kernel_section(tps, pspace, x)
            assert rbf.native_inner(tps, pspace, f, sec) == pytest.approx(float(f(x)), abs=1e-9)


class TestCalL2:
    def test_zero_and_one(self, tps, rng):
        pspace = rbf.PolySpace.from_points(2, 2, rng.random((10, 2)))
        assert rbf.calL2_norm(lambda X: np.zeros(len(X)), pspace) == 0.0
        assert rbf.calL2_norm(lambda X: np.ones(len(X)), pspace) == pytest.approx(math.sqrt(2))

    def test_vanishing_on_xi(self, rng):
        pspace = rbf.PolySpace.from_points(2, 2, [[0, 0], [1, 0], [0, 1]])
        f = lambda X: np.asarray(X)[..., 0] * np.asarray(X)[..., 1]
        # int_0^1 int_0^1 x^2 y^2 = 1/9
        assert rbf.calL2_norm(f, pspace) == pytest.approx(1 / 3, rel=1e-12)


class TestProjectionAudit:
    def test_fine_40_coarse_12(self, tps, rng):
        fine = rng.random((40, 2))
        coarse = fine[:12]
        pspace = rbf.PolySpace.from_points(2, 2, coarse)
        f = rbf.RbfFunction(tps, fine, constrained(fine, rng), rng.standard_normal(3), 2)
        audit = rbf.rbf_projection_audit(tps, pspace, f, coarse)
        assert audit.passed
        assert audit.err_sq_direct == pytest.approx(audit.err_sq_pythagoras, rel=1e-6)

    def test_target_in_space(self, tps, rng):
        pts = rng.random((12, 2))
        pspace = rbf.PolySpace.from_points(2, 2, pts)
        f = rbf.RbfFunction(tps, pts, constrained(pts, rng), rng.standard_normal(3), 2)
        audit = rbf.rbf_projection_audit(tps, pspace, f, pts)
        assert math.sqrt(max(audit.err_sq_direct, 0.0)) <= 1e-7 * math.sqrt(audit.norm_sq_target)

    def test_coarse_equals_xi(self, tps, rng):
        fine = rng.random((20, 2))
        pspace = rbf.PolySpace.from_points(2, 2, fine)
        f = rbf.RbfFunction(tps, fine, constrained(fine, rng), rng.standard_normal(3), 2)
        audit = rbf.rbf_projection_audit(tps, pspace, f, pspace.xi)
        assert audit.galerkin_ok

    def test_xi_must_be_in_coarse(self, tps, rng):
        fine = rng.random((20, 2))
        pspace = rbf.PolySpace.from_points(2, 2, fine)
        f = rbf.RbfFunction(tps, fine, constrained(fine, rng), np.zeros(3), 2)
        with pytest.raises(ValueError):
            rbf.rbf_projection_audit(tps, pspace, f, rng.random((10, 2)))
