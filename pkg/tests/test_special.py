import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import hermite as H

from tfwater.errors import DomainError
from tfwater.special import HermiteBasis, hermite_fn, lambert_w0, lambert_wm1

INV_E = math.exp(-1.0)


def bisect_w(x, lo, hi):
    """Reference root of w e^w = x on a bracket where w e^w is monotone."""
    f = lambda w: w * math.exp(w) - x
    flo = f(lo)
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestLambertW0:
    def test_zero(self):
        assert lambert_w0(0.0) == 0.0

    def test_e(self):
        assert lambert_w0(math.e) == pytest.approx(1.0, rel=1e-15)

    def test_capacity_argument(self):
        x = (4 * math.pi * 100 - 1) / math.e
        assert x == pytest.approx(461.923, abs=1e-3)
        ref = bisect_w(x, 0.0, 10.0)
        assert lambert_w0(x) == pytest.approx(ref, rel=1e-12)
        # the quoted 4.6082 is a rounded figure; the bisection root is 4.60767
        assert lambert_w0(x) == pytest.approx(4.6082, abs=1e-3)

    def test_branch_point(self):
        assert lambert_w0(-INV_E) == -1.0
        assert lambert_w0(-INV_E - 5e-16) == -1.0

    def test_domain(self):
        with pytest.raises(DomainError):
            lambert_w0(-0.4)
        with pytest.raises(DomainError):
            lambert_w0(float("nan"))

    def test_matches_mpmath(self):
        for x in [-0.36, -0.2, -1e-8, 1e-300, 0.5, 3.0, 1e5, 1e300]:
            assert lambert_w0(x) == pytest.approx(float(mpmath.lambertw(x, 0).real), rel=1e-13, abs=1e-300)


class TestLambertWm1:
    def test_branch_point(self):
        assert lambert_wm1(-INV_E) == -1.0

    def test_rate_argument(self):
        x = -1 / (10 * math.e)
        assert x == pytest.approx(-0.0367879, abs=1e-7)
        ref = bisect_w(x, -50.0, -1.0)
        assert lambert_wm1(x) == pytest.approx(ref, rel=1e-12)
        assert lambert_wm1(x) == pytest.approx(-4.8887, abs=2e-3)

    def test_monotone(self):
        assert lambert_wm1(-0.01) < lambert_wm1(-0.1)

    @pytest.mark.parametrize("x", [0.0, 0.1, -0.5])
    def test_domain(self, x):
        with pytest.raises(DomainError):
            lambert_wm1(x)

    def test_matches_mpmath(self):
        for x in [-0.3678, -0.3, -0.1, -1e-3, -1e-100, -1e-300]:
            assert lambert_wm1(x) == pytest.approx(float(mpmath.lambertw(x, -1).real), rel=1e-13)


def test_residual_random_points():
    rng = np.random.default_rng(7)
    # log-uniform coverage of both branches plus the neighbourhood of -1/e
    x0 = np.concatenate([-INV_E * rng.random(2500), np.exp(rng.uniform(-700, 700, 2500))])
    xm = -np.exp(rng.uniform(-700, -1, 4000))
    xm = np.concatenate([xm, -INV_E * (1 - rng.random(1000) ** 4)])
    bad = 0
    for x in x0:
        w = lambert_w0(x)
        bad += not (abs(w * math.exp(w) - x) <= 1e-12 * max(1, abs(x)) and w >= -1)
    for x in xm:
        w = lambert_wm1(x)
        bad += not (abs(w * math.exp(w) - x) <= 1e-12 * max(1, abs(x)) and w <= -1)
    assert bad == 0


@settings(max_examples=300, deadline=None)
@given(st.floats(min_value=-INV_E, max_value=1e300))
def test_w0_property(x):
    w = lambert_w0(x)
    assert w >= -1
    assert abs(w * math.exp(w) - x) <= 1e-12 * max(1.0, abs(x))


@settings(max_examples=300, deadline=None)
@given(st.floats(min_value=-INV_E, max_value=-1e-300))
def test_wm1_property(x):
    w = lambert_wm1(x)
    assert w <= -1
    assert abs(w * math.exp(w) - x) <= 1e-12 * max(1.0, abs(x))


def physicists_hermite_fn(k, t):
    # independent route: physicists' polynomial with explicit normalization
    c = np.zeros(k + 1)
    c[k] = 1.0
    norm = math.sqrt(2.0 ** k * math.factorial(k) * math.sqrt(math.pi))
    return H.hermval(t, c) * np.exp(-t * t / 2) / norm


class TestHermite:
    def test_values_at_zero(self):
        b = HermiteBasis(1.0, 8)
        assert hermite_fn(b, 0, 0.0) == pytest.approx(math.pi ** -0.25, rel=1e-15)
        assert hermite_fn(b, 0, 0.0) == pytest.approx(0.75113, abs=1e-5)
        assert hermite_fn(b, 1, 0.0) == 0.0

    @pytest.mark.parametrize("k", [0, 1, 2, 5, 11, 20])
    def test_matches_polynomial_form(self, k):
        t = np.linspace(-8, 8, 161)
        np.testing.assert_allclose(hermite_fn(HermiteBasis(1.0, 30), k, t), physicists_hermite_fn(k, t),
                                   atol=1e-13)

    def test_orthogonal_3_5(self):
        b = HermiteBasis(1.0, 8)
        t = np.linspace(-20, 20, 4001)
        dt = t[1] - t[0]
        assert abs(np.sum(hermite_fn(b, 3, t) * hermite_fn(b, 5, t)) * dt) < 1e-10

    @pytest.mark.parametrize("gamma", [0.1, 1.0, 3.0])
    def test_gram_identity(self, gamma):
        kmax = 40
        b = HermiteBasis(gamma, kmax)
        half = (math.sqrt(2 * kmax + 1) + 10) * gamma
        t = np.linspace(-half, half, 6001)
        tab = b.table(t)
        gram = tab @ tab.T * (t[1] - t[0])
        np.testing.assert_allclose(gram, np.eye(kmax + 1), atol=1e-8)

    def test_dilation_covariance(self):
        t = np.linspace(-3, 3, 41)
        for k in (0, 4, 9):
            lhs = hermite_fn(HermiteBasis(0.3, 10), k, t)
            rhs = 0.3 ** -0.5 * hermite_fn(HermiteBasis(1.0, 10), k, t / 0.3)
            np.testing.assert_array_equal(lhs, rhs)

    def test_no_overflow_far_out(self):
        b = HermiteBasis(1.0, 300)
        vals = b.table(np.array([-40.0, -25.0, 0.5, 25.0, 40.0]))
        assert np.all(np.isfinite(vals))
        # beyond the turning point sqrt(2k+1) values are tiny but not garbage
        assert abs(vals[300, 0]) < 1e-20

    def test_order_range(self):
        b = HermiteBasis(1.0, 5)
        with pytest.raises(DomainError):
            hermite_fn(b, 6, 0.0)
        with pytest.raises(DomainError):
            hermite_fn(b, -1, 0.0)
        with pytest.raises(DomainError):
            HermiteBasis(0.0, 5)
