import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ratedouble import korobov
from ratedouble.korobov import KorobovSpace, SpectralFunction


def trig(coeffs, d=1):
    return SpectralFunction.from_coefficients(coeffs, d)


class TestWeights:
    def test_zero_frequency(self):
        assert korobov.r_weight(KorobovSpace.create(2.0, 3), [0, 0, 0]) == 1.0

    def test_d1(self, space1):
        assert korobov.r_weight(space1, 3) == pytest.approx(9.0, rel=1e-15)

    def test_product_weights(self):
        space = KorobovSpace.create(1.0, 3, (0.5, 1.0, 0.5))
        # (2^2 / 0.5) * 1 * (3^2 / 0.5)
        assert korobov.r_weight(space, [2, 0, 3]) == pytest.approx(144.0, rel=1e-14)

    def test_invalid_weights(self):
        with pytest.raises(ValueError):
            KorobovSpace.create(1.0, 2, (1.0, 0.0))
        with pytest.raises(ValueError):
            KorobovSpace.create(0.4, 1)

    def test_square_identity_examples(self):
        space = KorobovSpace.create(1.0, 2, (0.25, 1.0))
        h = np.array([[1, 0], [3, -2], [0, 0], [-7, 5]])
        assert korobov.r_square_identity(space, h)
        np.testing.assert_allclose(korobov.r_weight(space, h) ** 2,
                                   korobov.r_weight(space.doubled(), h), rtol=1e-14)

    def test_doubled_space(self):
        space = KorobovSpace.create(1.5, 2, (0.3, 0.8))
        big = space.doubled()
        assert big.alpha == 3.0
        np.testing.assert_allclose(big.gamma, [0.09, 0.64])

    @given(st.lists(st.integers(-40, 40), min_size=3, max_size=3),
           st.lists(st.integers(-40, 40), min_size=3, max_size=3))
    @settings(max_examples=60, deadline=None)
    def test_multiplicative_over_coordinates(self, h, k):
        # r(h) = r(h_1, 0, 0) r(0, h_2, 0) r(0, 0, h_3)
        space = KorobovSpace.create(1.5, 3, (0.5, 0.7, 0.9))
        parts = [korobov.r_weight(space, [h[0], 0, 0]), korobov.r_weight(space, [0, h[1], 0]),
                 korobov.r_weight(space, [0, 0, h[2]])]
        assert korobov.r_weight(space, h) == pytest.approx(np.prod(parts), rel=1e-13)
        assert korobov.r_square_identity(space, np.array([h, k]))


class TestEta:
    def test_values(self):
        assert korobov.eta(1, 0.0) == pytest.approx(math.pi ** 2 / 3, rel=1e-14)
        assert korobov.eta(1, 0.5) == pytest.approx(-math.pi ** 2 / 6, rel=1e-14)
        assert korobov.eta(2, 0.0) == pytest.approx(math.pi ** 4 / 45, rel=1e-14)

    def test_periodic_and_even(self):
        t = np.linspace(-2, 2, 37)
        for alpha in (1, 2, 3, 1.5):
            np.testing.assert_allclose(korobov.eta(alpha, t + 1), korobov.eta(alpha, t), atol=1e-11)
            np.testing.assert_allclose(korobov.eta(alpha, -t), korobov.eta(alpha, t), atol=1e-11)

    @pytest.mark.parametrize("alpha", [1, 2, 3, 4])
    def test_closed_form_against_series(self, alpha):
        t = np.linspace(0, 1, 201)
        series, tail = korobov.eta_series(alpha, t, 3000)
        assert np.max(np.abs(korobov.eta(alpha, t) - series)) <= tail + 1e-13

    def test_non_integer_alpha(self):
        t = np.linspace(0, 1, 11)
        series, tail = korobov.eta_series(1.5, t, 20000)
        assert np.max(np.abs(korobov.eta(1.5, t) - series)) <= tail + 1e-9

    def test_zero_mean(self):
        t = (np.arange(4096) + 0.5) / 4096
        assert abs(np.mean(korobov.eta(2, t))) < 1e-10


class TestKernel:
    def test_diagonal(self, space1):
        assert korobov.kernel_eval(space1, 0.3, 0.3) == pytest.approx(1 + math.pi ** 2 / 3)
        space = KorobovSpace.create(1.0, 2)
        assert korobov.kernel_eval(space, [0.1, 0.7], [0.1, 0.7]) == pytest.approx(
            (1 + math.pi ** 2 / 3) ** 2)

    def test_symmetric_and_shift_invariant(self, rng):
        space = KorobovSpace.create(2.0, 2, (1.0, 0.4))
        X, Y = rng.random((15, 2)), rng.random((9, 2))
        K = korobov.kernel_matrix(space, X, Y)
        np.testing.assert_allclose(K, korobov.kernel_matrix(space, Y, X).T, rtol=1e-12)
        shift = rng.random(2)
        np.testing.assert_allclose(K, korobov.kernel_matrix(space, X + shift, Y + shift),
                                   rtol=1e-11)

    def test_subset_expansion(self, rng):
        space = KorobovSpace.create(1.0, 3, (0.5, 0.25, 1.0))
        for _ in range(5):
            x, y = rng.random(3), rng.random(3)
            assert korobov.kernel_eval(space, y, x) == pytest.approx(
                korobov.kernel_eval_subsets(space, y, x), rel=1e-13)

    def test_reproducing_property(self, rng):
        space = KorobovSpace.create(1.0, 1)
        worst = 0.0
        for _ in range(100):
            coeffs = {k: rng.standard_normal() for k in range(-5, 6)}
            coeffs = {k: 0.5 * (coeffs[k] + coeffs[-k]) for k in coeffs}  # real, even
            f = trig(coeffs)
            y = rng.random()
            section = SpectralFunction.kernel_combination(space, [[y]], [1.0])
            val, tail = korobov.inner_product(space, f, section, 8)
            assert tail == 0.0
            worst = max(worst, abs(val - float(f(y))))
        assert worst < 1e-12


class TestNorms:
    def test_constant(self, space1):
        nr = korobov.spectral_norms(space1, trig({0: 1.0}))
        assert (nr.l2, nr.h, nr.b) == pytest.approx((1.0, 1.0, 1.0))
        assert (nr.l2_tail, nr.h_tail, nr.b_tail) == (0.0, 0.0, 0.0)

    def test_cosine(self, space1):
        nr = korobov.spectral_norms(space1, trig({1: 0.5, -1: 0.5}))
        assert (nr.l2 ** 2, nr.h ** 2, nr.b ** 2) == pytest.approx((0.5, 0.5, 0.5))
        nr = korobov.spectral_norms(space1, trig({2: 0.5, -2: 0.5}))
        assert (nr.l2 ** 2, nr.h ** 2, nr.b ** 2) == pytest.approx((0.5, 2.0, 8.0))

    def test_truncation_below_support(self, space1):
        with pytest.raises(ValueError):
            korobov.spectral_norms(space1, trig({10: 1.0}), truncation=4)

    def test_inner_product_constants(self, space1):
        val, tail = korobov.inner_product(space1, trig({0: 1.0}), trig({0: 2.0}))
        assert val == pytest.approx(2.0) and tail == 0.0

    def test_dimension_mismatch(self, space1):
        with pytest.raises(ValueError):
            korobov.inner_product(space1, trig({0: 1.0}), trig({(0, 0): 1.0}, 2))

    def test_kernel_combination_h_norm(self, rng):
        # ||sum c_k K(t_k, .)||_H^2 = c^T K c
        space = KorobovSpace.create(1.0, 1)
        t, c = rng.random(6), rng.standard_normal(6)
        f = SpectralFunction.kernel_combination(space, t[:, None], c)
        nr = korobov.spectral_norms(space, f, 256)
        exact = c @ korobov.kernel_matrix(space, t[:, None], t[:, None]) @ c
        assert nr.h ** 2 <= exact * (1 + 1e-12)
        assert nr.h + nr.h_tail >= math.sqrt(exact) * (1 - 1e-12)
        assert nr.b_tail == math.inf

    def test_lattice_tail_is_exact(self, rng):
        space = KorobovSpace.create(2.0, 1)
        n = 16
        t = np.arange(n) / n
        c = rng.standard_normal(n)
        f = SpectralFunction.kernel_combination(space, t[:, None], c, ((1,), n))
        nr = korobov.spectral_norms(space, f, 64)
        exact = c @ korobov.kernel_matrix(space, t[:, None], t[:, None]) @ c
        assert nr.h ** 2 == pytest.approx(exact, rel=1e-12)

    def test_tails_shrink(self, rng):
        space = KorobovSpace.create(1.0, 2)
        t, c = rng.random((5, 2)), rng.standard_normal(5)
        f = SpectralFunction.kernel_combination(space, t, c)
        tails = [korobov.spectral_norms(space, f, T).l2_tail for T in (8, 16, 32)]
        assert tails[0] > tails[1] > tails[2]

    def test_duality(self, rng):
        # |<f, g>_H| <= ||f||_L2 ||g||_B
        space = KorobovSpace.create(1.0, 2, (1.0, 0.5))
        grid = korobov.frequency_grid(2, 3)
        for _ in range(50):
            f = SpectralFunction(2, grid, rng.standard_normal(grid.shape[0]))
            g = SpectralFunction(2, grid, rng.standard_normal(grid.shape[0]))
            # complex amplitudes: use the raw sum rather than the real inner product
            r = korobov.r_weight(space, grid)
            lhs = abs(np.sum(r * f.amps * np.conj(g.amps)))
            nf, ng = korobov.spectral_norms(space, f, 3), korobov.spectral_norms(space, g, 3)
            assert lhs <= nf.l2 * ng.b * (1 + 1e-12)


class TestSpectralFunction:
    def test_evaluation(self):
        f = trig({1: 0.5, -1: 0.5, 0: 2.0})
        x = np.linspace(0, 1, 9)
        np.testing.assert_allclose(f(x), 2 + np.cos(2 * np.pi * x), atol=1e-14)

    def test_arithmetic_merges_frequencies(self):
        f = trig({1: 1.0, 2: 1.0}) - trig({1: 1.0})
        assert f.fourier([[1], [2]]) == pytest.approx([0.0, 1.0])

    def test_kernel_fourier_coefficients(self, space1):
        f = SpectralFunction.kernel_combination(space1, [[0.25]], [1.0])
        # K(t, .)^(h) = exp(-2 pi i h t) / r(h)
        assert f.fourier([[2]])[0] == pytest.approx(np.exp(-1j * np.pi) / 4)
        assert f(0.25) == pytest.approx(korobov.kernel_eval(space1, 0.25, 0.25))

    def test_outside_sum(self, space1):
        # sum_{|h| > 2} |h|^-2 = 2 (pi^2/6 - 1 - 1/4)
        assert korobov.outside_sum(space1, 2, 1) == pytest.approx(
            2 * (math.pi ** 2 / 6 - 1.25), rel=1e-12)
