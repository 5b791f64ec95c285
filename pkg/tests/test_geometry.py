import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ortho_group

from busemann.errors import DomainError, InvalidInputError
from busemann.geometry import (EPS_BALL, busemann, busemann_limit, exp0, geodesic_distance,
                               geodesic_ray, ideal_point, project_to_ball)

LN3 = math.log(3.0)


def random_unit(rng, d):
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


class TestExp0:
    def test_origin_maps_to_origin(self):
        assert np.array_equal(exp0([0.0, 0.0]), [0.0, 0.0])

    def test_hand_value(self):
        np.testing.assert_allclose(exp0([2.0, 0.0]), [math.tanh(1.0), 0.0], rtol=0, atol=1e-15)
        assert exp0([2.0, 0.0])[0] == pytest.approx(0.761594, abs=1e-6)

    def test_norm_increases_toward_one(self):
        norms = [np.linalg.norm(exp0([t, 0.0])) for t in (0.5, 2.0, 8.0, 20.0, 1e3)]
        assert all(a <= b for a, b in zip(norms, norms[1:]))
        assert norms[-1] == pytest.approx(1.0 - EPS_BALL, abs=0)

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=12))
    def test_range_inside_ball(self, coords):
        assert np.linalg.norm(exp0(coords)) < 1.0

    def test_batch_matches_rows(self, rng):
        X = rng.standard_normal((7, 3)) * 3
        Z = exp0(X)
        for x, z in zip(X, Z):
            np.testing.assert_array_equal(exp0(x), z)

    @pytest.mark.parametrize("bad", [[np.nan, 0.0], [np.inf, 1.0]])
    def test_non_finite_rejected(self, bad):
        with pytest.raises(InvalidInputError):
            exp0(bad)


class TestGeodesicDistance:
    def test_identity(self):
        assert geodesic_distance([0.0, 0.0], [0.0, 0.0]) == 0.0

    def test_radial_hand_value(self):
        assert geodesic_distance([0.0, 0.0], [0.5, 0.0]) == pytest.approx(LN3, abs=1e-12)

    def test_symmetry(self, rng):
        for _ in range(50):
            a = rng.uniform(0, 0.99) * random_unit(rng, 4)
            b = rng.uniform(0, 0.99) * random_unit(rng, 4)
            assert geodesic_distance(a, b) == geodesic_distance(b, a)
            assert geodesic_distance(a, b) > 0

    @given(st.floats(1e-9, 1 - EPS_BALL), st.integers(1, 8))
    def test_radial_closed_form(self, r, d):
        e = np.zeros(d)
        e[0] = r
        expected = math.log((1 + r) / (1 - r))
        assert geodesic_distance(np.zeros(d), e) == pytest.approx(expected, abs=1e-12)

    def test_boundary_rejected(self):
        with pytest.raises(DomainError):
            geodesic_distance([0.0, 0.0], [1.0, 0.0])
        with pytest.raises(DomainError):
            geodesic_distance([0.6, 0.9], [0.0, 0.0])


class TestGeodesicRay:
    def test_start_at_origin(self):
        assert np.array_equal(geodesic_ray([1.0, 0.0], 0.0), [0.0, 0.0])

    def test_reaches_half_at_ln3(self):
        z = geodesic_ray([1.0, 0.0], LN3)
        np.testing.assert_allclose(z, [0.5, 0.0], atol=1e-15)
        assert geodesic_distance([0.0, 0.0], z) == pytest.approx(LN3, abs=1e-12)

    def test_unit_speed(self, rng):
        for d in (1, 2, 5, 9):
            p = random_unit(rng, d)
            assert geodesic_distance(geodesic_ray(p, 1.0), geodesic_ray(p, 3.0)) == pytest.approx(2.0, abs=1e-12)

    def test_negative_t_rejected(self):
        with pytest.raises(DomainError):
            geodesic_ray([1.0, 0.0], -0.1)


class TestBusemann:
    def test_zero_at_origin(self, rng):
        for d in (1, 3, 10):
            assert busemann(random_unit(rng, d), np.zeros(d)) == 0.0

    def test_hand_values(self):
        assert busemann([1.0, 0.0], [0.5, 0.0]) == pytest.approx(math.log(0.25 / 0.75), abs=1e-15)
        assert busemann([1.0, 0.0], [0.5, 0.0]) == pytest.approx(-1.098612, abs=1e-6)
        assert busemann([1.0, 0.0], [-0.5, 0.0]) == pytest.approx(LN3, abs=1e-15)

    def test_prototype_normalized_on_input(self):
        assert busemann([3.0, 0.0], [0.5, 0.0]) == pytest.approx(-LN3, abs=1e-15)

    def test_boundary_rejected(self):
        with pytest.raises(DomainError):
            busemann([1.0, 0.0], [0.0, 1.0])

    @pytest.mark.parametrize("t", [0.0, 0.3, 1.0, 4.0, 7.5, 10.0])
    def test_decreases_at_unit_rate_along_ray(self, rng, t):
        p = random_unit(rng, 5)
        assert busemann(p, geodesic_ray(p, t)) == pytest.approx(-t, abs=1e-9)

    def test_rotation_invariance(self, rng):
        for d in (2, 3, 6):
            R = ortho_group.rvs(d, random_state=7)
            for _ in range(20):
                p = random_unit(rng, d)
                z = rng.uniform(0, 0.95) * random_unit(rng, d)
                assert busemann(R @ p, R @ z) == pytest.approx(busemann(p, z), abs=1e-12)

    def test_closed_form_matches_high_precision_limit(self, rng):
        # oracle: the defining limit evaluated with 60-digit arithmetic far out on the ray
        mpmath.mp.dps = 60
        for _ in range(5):
            d = 3
            p = random_unit(rng, d)
            z = rng.uniform(0, 0.9) * random_unit(rng, d)
            t = mpmath.mpf(80)
            a = mpmath.tanh(t / 2)
            diff = sum((a * mpmath.mpf(pi) - mpmath.mpf(zi)) ** 2 for pi, zi in zip(p, z))
            zn = sum(mpmath.mpf(zi) ** 2 for zi in z)
            limit = mpmath.acosh(1 + 2 * diff / ((1 - a**2) * (1 - zn))) - t
            assert busemann(p, z) == pytest.approx(float(limit), abs=1e-13)


class TestBusemannLimit:
    def test_origin(self, rng):
        for _ in range(5):
            assert abs(busemann_limit(random_unit(rng, 4), np.zeros(4), 20.0)) < 1e-6

    def test_hand_point(self):
        assert busemann_limit([1.0, 0.0], [0.5, 0.0], 20.0) == pytest.approx(-LN3, abs=1e-6)

    def test_error_shrinks_with_t(self, rng):
        p = random_unit(rng, 3)
        z = 0.6 * random_unit(rng, 3)
        exact = busemann(p, z)
        errs = [abs(busemann_limit(p, z, t) - exact) for t in (5.0, 10.0, 20.0)]
        assert errs[0] > errs[1] > errs[2]

    def test_consistency_up_to_radius_09(self, rng):
        for _ in range(200):
            d = int(rng.integers(1, 9))
            p = random_unit(rng, d)
            z = rng.uniform(0, 0.9) * random_unit(rng, d)
            assert abs(busemann_limit(p, z, 20.0) - busemann(p, z)) < 1e-6

    def test_nonpositive_t_rejected(self):
        with pytest.raises(DomainError):
            busemann_limit([1.0, 0.0], [0.0, 0.0], 0.0)


class TestProjectToBall:
    def test_inside_unchanged(self):
        x = np.array([0.3, -0.2])
        assert np.array_equal(project_to_ball(x, 1e-5), x)

    def test_forced_rescale(self):
        out = project_to_ball([0.6, 0.8], 1e-5)
        assert np.linalg.norm(out) == pytest.approx(1 - 1e-5, abs=1e-15)

    def test_zero(self):
        assert np.array_equal(project_to_ball([0.0, 0.0], 1e-3), [0.0, 0.0])

    @pytest.mark.parametrize("eps", [0.0, -1e-3, 0.5])
    def test_bad_eps(self, eps):
        with pytest.raises(InvalidInputError):
            project_to_ball([0.1], eps)

    def test_non_finite(self):
        with pytest.raises(InvalidInputError):
            project_to_ball([np.nan], 1e-5)


def test_ideal_point_normalizes():
    p = ideal_point([3.0, 4.0])
    assert abs(np.linalg.norm(p) - 1.0) <= 1e-12
    with pytest.raises(InvalidInputError):
        ideal_point([0.0, 0.0])
