import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shadowsynth.illum import (
    AffineParams,
    SlopeParams,
    darken,
    darken_color_jitter,
    darken_gamma,
    relit,
    to_affine_params,
    to_slope_params,
)

slope_params_st = st.builds(
    SlopeParams,
    l0=st.floats(0.0, 0.5),
    l1=st.floats(0.0, 0.4),
    l2=st.floats(0.0, 0.5),
    s1=st.floats(0.05, 0.55),
)


class TestParamConversions:
    def test_zero_intercepts(self):
        p = to_slope_params(AffineParams(alpha=(0.0, 0.0, 0.0), gamma=2.0))
        assert p == SlopeParams(0.0, 0.0, 0.0, 0.5)

    def test_direct_mapping(self):
        p = to_slope_params(AffineParams(alpha=(0.1, 0.05, 0.0), gamma=1.9))
        assert (p.l0, p.l1, p.l2) == (0.1, 0.05, 0.0)
        assert p.s1 == pytest.approx((1 - 0.05) / 1.9, abs=1e-15)
        assert p.s1 == pytest.approx(0.5, abs=1e-15)

    def test_brightening_gamma_rejected(self):
        # gamma = 0.5 means slope 1/gamma = 2 > 1
        with pytest.raises(ValueError):
            to_slope_params(AffineParams(alpha=(0.0, 0.0, 0.0), gamma=0.5))

    def test_inverse_example(self):
        p = to_affine_params(SlopeParams(0.0, 0.0, 0.0, 0.5))
        assert p.gamma == 2.0 and p.alpha == (0.0, 0.0, 0.0)

    def test_inverse_derived(self):
        p = to_affine_params(SlopeParams(0.2, 0.2, 0.2, 0.4))
        assert p.gamma == pytest.approx((1 - 0.2) / 0.4, abs=1e-15)
        assert p.gamma == pytest.approx(2.0, abs=1e-15)

    def test_roundtrip_100k(self):
        rng = np.random.default_rng(5)
        l1 = rng.uniform(0.0, 0.25, 100_000)
        l0 = np.clip(l1 + rng.normal(0.05, 0.025, l1.size), 0.0, 0.99)
        l2 = np.clip(l1 + rng.normal(-0.05, 0.025, l1.size), 0.0, 0.99)
        s1 = rng.uniform(0.1, 1.0) * (1.0 - l1)
        s1 = np.maximum(s1, 1e-6)
        worst = 0.0
        for i in range(l1.size):
            p = SlopeParams(l0[i], l1[i], l2[i], s1[i])
            q = to_slope_params(to_affine_params(p))
            worst = max(
                worst,
                abs(q.l0 - p.l0),
                abs(q.l1 - p.l1),
                abs(q.l2 - p.l2),
                abs(q.s1 - p.s1),
            )
        assert worst < 1e-12

    def test_invariants_enforced(self):
        with pytest.raises(ValueError):
            SlopeParams(0.0, 0.5, 0.0, 0.6)  # slope 1.2
        with pytest.raises(ValueError):
            SlopeParams(-0.1, 0.0, 0.0, 0.5)
        with pytest.raises(ValueError):
            SlopeParams(0.0, 0.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            AffineParams(alpha=(0.0, 1.0, 0.0), gamma=1.5)


class TestDarken:
    def test_pure_scaling(self):
        p = SlopeParams(0.0, 0.0, 0.0, 0.5)
        img = np.full((2, 2, 3), 0.8)
        assert np.allclose(darken(img, p), 0.4, atol=0)

    def test_piecewise_boundary(self):
        p = SlopeParams(0.3, 0.2, 0.1, 0.4)
        img = np.zeros((1, 1, 3))
        img[0, 0] = [0.3, 0.2, 0.1]
        assert np.array_equal(darken(img, p), np.zeros((1, 1, 3)))

    def test_below_intercept_clamps_to_zero(self):
        p = SlopeParams(0.3, 0.2, 0.1, 0.4)
        img = np.full((1, 1, 3), 0.05)
        assert np.array_equal(darken(img, p), np.zeros((1, 1, 3)))

    def test_hand_evaluated(self):
        # slope = 0.45/0.95; R: (0.45/0.95)*(0.6 - 0.10) = 0.2368421052631579
        p = SlopeParams(0.10, 0.05, 0.00, 0.45)
        img = np.full((1, 1, 3), 0.6)
        out = darken(img, p)
        assert out[0, 0, 0] == pytest.approx(0.2368421052631579, abs=1e-12)

    @given(slope_params_st, st.integers(0, 2**32 - 1))
    @settings(max_examples=60, deadline=None)
    def test_never_brightens(self, p, seed):
        img = np.random.default_rng(seed).random((6, 5, 3))
        assert np.all(darken(img, p) <= img)

    @given(slope_params_st, st.integers(0, 2**32 - 1))
    @settings(max_examples=60, deadline=None)
    def test_monotone_in_input(self, p, seed):
        rng = np.random.default_rng(seed)
        x = rng.random((4, 4, 3))
        y = np.clip(x + rng.random((4, 4, 3)) * (1 - x), 0, 1)
        assert np.all(darken(x, p) <= darken(y, p) + 1e-15)


class TestRelit:
    def test_inverse_of_scaling(self):
        p = SlopeParams(0.0, 0.0, 0.0, 0.5)
        img = np.full((2, 2, 3), 0.4)
        assert np.allclose(relit(img, p), 0.8, atol=1e-15)

    def test_derived_inverse(self):
        p = SlopeParams(0.1, 0.05, 0.0, 0.45)
        img = np.zeros((1, 1, 3))
        img[0, 0, 0] = 0.2368421052631579
        assert relit(img, p)[0, 0, 0] == pytest.approx(0.6, abs=1e-12)

    @given(slope_params_st, st.integers(0, 2**32 - 1))
    @settings(max_examples=80, deadline=None)
    def test_roundtrip_above_intercepts(self, p, seed):
        lo = max(p.l0, p.l1, p.l2) + 1e-6
        img = np.random.default_rng(seed).uniform(lo, 1.0, size=(5, 5, 3))
        assert np.abs(relit(darken(img, p), p) - img).max() < 1e-9

    def test_clamps_above_one(self):
        # dark value too large for the slope: inverse exceeds 1, clamp
        p = SlopeParams(0.5, 0.5, 0.5, 0.2)
        img = np.full((1, 1, 3), 0.9)
        assert np.all(relit(img, p) == 1.0)


class TestDarkenGamma:
    def test_fixed_points(self):
        img = np.zeros((1, 2, 3))
        img[0, 1] = 1.0
        for y in (1.5, 2.0, 3.0):
            assert np.array_equal(darken_gamma(img, y), img)

    def test_square(self):
        assert darken_gamma(np.full((1, 1, 3), 0.5), 2.0)[0, 0, 0] == pytest.approx(0.25)

    def test_power_evaluated(self):
        out = darken_gamma(np.full((1, 1, 3), 0.7), 2.5)
        assert out[0, 0, 0] == pytest.approx(0.409963413001697, abs=1e-12)

    def test_range_enforced(self):
        img = np.full((1, 1, 3), 0.5)
        with pytest.raises(ValueError):
            darken_gamma(img, 1.2)
        with pytest.raises(ValueError):
            darken_gamma(img, 3.5)

    def test_converges_to_identity(self, rng):
        img = rng.random((4, 4, 3))
        for y, tol in ((1.1, 0.25), (1.01, 0.03), (1.001, 0.003)):
            gap = np.abs(darken_gamma(img, y, check_range=False) - img).max()
            assert gap < tol


class TestColorJitter:
    def test_identity_matrix(self, rng):
        img = rng.random((3, 3, 3))
        assert np.allclose(darken_color_jitter(img, np.eye(3)), img, atol=0)

    def test_half_identity(self, rng):
        img = rng.random((3, 3, 3))
        assert np.allclose(darken_color_jitter(img, 0.5 * np.eye(3)), img / 2)

    def test_matrix_vector_product(self):
        m = np.array([[0.4, 0.1, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 0.3]])
        out = darken_color_jitter(np.ones((1, 1, 3)), m)
        assert np.allclose(out[0, 0], [0.5, 0.5, 0.3], atol=1e-15)

    def test_dark_only_constraint_enforced(self):
        bright = np.eye(3) * 1.2
        with pytest.raises(ValueError):
            darken_color_jitter(np.ones((1, 1, 3)), bright, dark_only=True)
        negative = np.array([[0.5, -0.1, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 0.5]])
        with pytest.raises(ValueError):
            darken_color_jitter(np.ones((1, 1, 3)), negative, dark_only=True)

    def test_dark_only_darkens_grays(self, rng):
        m = np.array([[0.3, 0.1, 0.05], [0.02, 0.6, 0.1], [0.0, 0.1, 0.4]])
        img = np.repeat(rng.random((4, 4, 1)), 3, axis=2)
        out = darken_color_jitter(img, m, dark_only=True)
        assert np.all(out <= img + 1e-15)
        assert np.all(out.max(axis=2) <= img.max(axis=2) + 1e-15)
