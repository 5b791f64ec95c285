import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit

from busemann.checks import central_difference, sample_pre_activation
from busemann.errors import DomainError, InvalidInputError
from busemann.geometry import exp0
from busemann.loss import (PenaltyConfig, batch_loss, density_radial_integral, loss_gradient,
                           penalized_busemann_loss, phi_linear)


def unit(rng, d):
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


def radial_integral_oracle(d, phi, delta):
    """Closed form via the regularized incomplete beta function:
    substituting s = r^2 gives (1/2) B_x(d/2, phi + 2 - d) with x = (1-delta)^2."""
    mpmath.mp.dps = 40
    x = (1 - mpmath.mpf(delta)) ** 2
    return float(mpmath.betainc(mpmath.mpf(d) / 2, mpmath.mpf(phi) + 2 - d, 0, x) / 2)


class TestPhiLinear:
    @pytest.mark.parametrize("d, s, expected", [(50, 0.1, 5.0), (1, 1.0, 1.0), (5, 0.0, 0.0)])
    def test_values(self, d, s, expected):
        assert phi_linear(d, s) == pytest.approx(expected, abs=1e-12)

    def test_config(self):
        assert PenaltyConfig(slope=0.1, dimension=50).phi == pytest.approx(5.0)

    @pytest.mark.parametrize("d, s", [(0, 0.1), (3, -0.1)])
    def test_rejects(self, d, s):
        with pytest.raises(InvalidInputError):
            phi_linear(d, s)


class TestPenalizedLoss:
    @pytest.mark.parametrize("phi", [0.0, 1.0, 7.3])
    def test_zero_at_origin(self, rng, phi):
        assert penalized_busemann_loss(np.zeros(4), unit(rng, 4), phi) == 0.0

    def test_hand_value(self):
        expected = -math.log(3.0) - math.log(0.75)
        assert penalized_busemann_loss([0.5, 0.0], [1.0, 0.0], 1.0) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(-0.81093, abs=1e-5)

    def test_penalty_difference(self):
        diff = (penalized_busemann_loss([0.9, 0.0], [1.0, 0.0], 2.0)
                - penalized_busemann_loss([0.9, 0.0], [1.0, 0.0], 0.0))
        assert diff == pytest.approx(-2.0 * math.log(0.19), abs=1e-12)
        assert diff == pytest.approx(3.32146, abs=1e-5)

    def test_blows_up_toward_boundary(self):
        p = np.array([0.0, 1.0])
        vals = [penalized_busemann_loss([r, 0.0], p, 0.5) for r in (0.9, 0.99, 0.999, 0.99999)]
        assert all(a < b for a, b in zip(vals, vals[1:]))
        assert vals[-1] > 5.0

    def test_boundary_rejected(self):
        with pytest.raises(DomainError):
            penalized_busemann_loss([1.0, 0.0], [1.0, 0.0], 1.0)

    def test_negative_phi_rejected(self):
        with pytest.raises(InvalidInputError):
            penalized_busemann_loss([0.1, 0.0], [1.0, 0.0], -1.0)

    def test_decomposition(self, rng):
        for _ in range(200):
            d = int(rng.integers(1, 10))
            z = rng.uniform(0, 0.999) * unit(rng, d)
            p = unit(rng, d)
            phi = rng.uniform(0, 10)
            lhs = penalized_busemann_loss(z, p, phi) - penalized_busemann_loss(z, p, 0.0)
            assert lhs == pytest.approx(-phi * math.log1p(-z @ z), abs=1e-12)

    @given(st.floats(0.0, 5.0), st.floats(0.01, 5.0), st.floats(1e-3, 0.99))
    def test_monotone_in_phi(self, phi1, gap, r):
        z = np.array([0.0, r, 0.0])
        p = np.array([1.0, 0.0, 0.0])
        assert penalized_busemann_loss(z, p, phi1) < penalized_busemann_loss(z, p, phi1 + gap)

    def test_argmin_loss_is_argmax_cosine(self, rng):
        for _ in range(300):
            d = int(rng.integers(2, 8))
            C = int(rng.integers(2, 12))
            P = np.stack([unit(rng, d) for _ in range(C)])
            z = rng.uniform(0.01, 0.99) * unit(rng, d)
            phi = rng.uniform(0, 3)
            losses = [penalized_busemann_loss(z, p, phi) for p in P]
            assert int(np.argmin(losses)) == int(np.argmax(P @ z))


class TestLossGradient:
    def test_against_finite_differences(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            d = int(rng.integers(1, 11))
            x = sample_pre_activation(rng, d)
            p = unit(rng, d)
            phi = rng.uniform(0, 5)
            g = loss_gradient(x, p, phi)
            fd = central_difference(lambda v: penalized_busemann_loss(exp0(v), p, phi), x)
            assert np.linalg.norm(g.grad - fd) / np.linalg.norm(fd) < 1e-6
            assert g.value == pytest.approx(penalized_busemann_loss(exp0(x), p, phi), abs=1e-12)

    def test_small_argument_series(self, rng):
        p = unit(rng, 3)
        for scale in (1e-5, 1e-7):
            x = scale * unit(rng, 3)
            fd = central_difference(lambda v: penalized_busemann_loss(exp0(v), p, 1.0), x, h=1e-7)
            np.testing.assert_allclose(loss_gradient(x, p, 1.0).grad, fd, rtol=1e-6, atol=1e-8)

    def test_opposite_prototypes_give_opposite_radial_gradient(self, rng):
        p = unit(rng, 4)
        x = np.zeros(4)
        g_plus = loss_gradient(x, p, 0.7).grad
        g_minus = loss_gradient(x, -p, 0.7).grad
        assert g_plus @ p == pytest.approx(-(g_minus @ p), abs=1e-15)
        assert g_plus @ p == pytest.approx(-1.0, abs=1e-15)  # d/dt at 0 of b_p(tanh(t/2) p)

    def test_one_dimensional_logistic_gradient(self):
        rng = np.random.default_rng(3)
        for y in np.concatenate([[0.0, 4.0, -4.0], rng.uniform(-10, 10, 50)]):
            for label in (0, 1):
                g = loss_gradient([y], [2.0 * label - 1.0], 1.0).grad[0]
                assert g / 2.0 == pytest.approx(expit(y) - label, abs=1e-12)

    def test_saturated_input(self):
        g = loss_gradient([200.0, 0.0], [0.0, 1.0], 1.0)
        assert np.all(np.isfinite(g.grad)) and np.isfinite(g.value)

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidInputError):
            loss_gradient([np.nan, 0.0], [1.0, 0.0], 1.0)


class TestBatchLoss:
    P = np.array([[1.0, 0.0], [0.0, 1.0]])

    def test_single_example(self, rng):
        x = rng.standard_normal(2)
        mean, grads = batch_loss(x[None, :], [1], self.P, 0.4)
        assert mean == pytest.approx(penalized_busemann_loss(exp0(x), self.P[1], 0.4), abs=1e-12)
        np.testing.assert_allclose(grads[0], loss_gradient(x, self.P[1], 0.4).grad, atol=1e-15)

    def test_duplicate_invariance(self, rng):
        x = rng.standard_normal((1, 2))
        once, _ = batch_loss(x, [0], self.P, 1.0)
        twice, _ = batch_loss(np.vstack([x, x]), [0, 0], self.P, 1.0)
        assert once == pytest.approx(twice, abs=1e-15)

    def test_mean_of_hand_values(self):
        X = np.array([[math.log(3.0), 0.0], [2 * math.atanh(0.9), 0.0]])
        mean, _ = batch_loss(X, [0, 0], self.P, 1.0)
        a = -math.log(3.0) - math.log(0.75)
        b = math.log(0.01 / 0.19) - math.log(0.19)
        assert mean == pytest.approx((a + b) / 2, abs=1e-9)

    def test_label_out_of_range(self):
        with pytest.raises(InvalidInputError):
            batch_loss(np.zeros((1, 2)), [2], self.P, 1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            batch_loss(np.zeros((1, 3)), [0], self.P, 1.0)


class TestDensityRadialIntegral:
    @pytest.mark.parametrize("d", [2, 4, 5, 6])
    @pytest.mark.parametrize("offset", [-0.5, 0.0, 0.5, 1.5])
    @pytest.mark.parametrize("delta", [1e-2, 1e-4, 1e-6, 1e-8])
    def test_matches_incomplete_beta(self, d, offset, delta):
        phi = max(d - 2 + offset, 0.0)
        assert density_radial_integral(d, phi, delta) == pytest.approx(
            radial_integral_oracle(d, phi, delta), rel=1e-8)

    def test_convergent_tail_increment_matches_oracle(self):
        i6, i8 = (density_radial_integral(4, 2.5, t) for t in (1e-6, 1e-8))
        o6, o8 = (radial_integral_oracle(4, 2.5, t) for t in (1e-6, 1e-8))
        assert i8 > i6 > 0
        assert abs(i6 - i8) / i8 == pytest.approx(abs(o6 - o8) / o8, rel=1e-4)
        # the finite limit exists: the integrand exponent is -1/2
        limit = float(mpmath.beta(2, 0.5) / 2)
        assert i8 < limit and limit - i8 < 1e-3

    def test_divergent_example(self):
        assert density_radial_integral(4, 1.5, 1e-8) / density_radial_integral(4, 1.5, 1e-4) > 10

    def test_threshold_is_logarithmic(self):
        ratio = density_radial_integral(4, 2.0, 1e-8) / density_radial_integral(4, 2.0, 1e-4)
        assert 1.5 < ratio < 3.0

    @pytest.mark.parametrize("d, delta", [(1, 1e-4), (4, 0.0), (4, 0.2)])
    def test_preconditions(self, d, delta):
        with pytest.raises(InvalidInputError):
            density_radial_integral(d, 2.0, delta)
