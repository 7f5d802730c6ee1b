import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import mehler_kernel
from tfwater import heat
from tfwater.errors import DomainError
from tfwater.weyl import spectrum, symbol_to_kernel


class TestModel:
    def test_r1(self):
        m = heat.model(1.0, 1.0)
        assert m.delta == pytest.approx(math.log(3), rel=1e-15)
        assert m.delta == pytest.approx(1.09861, abs=1e-5)
        assert m.rho == pytest.approx(1 / 3, rel=1e-15)
        assert m.c ** 2 == pytest.approx(4 / 3, rel=1e-15)

    def test_r2(self):
        m = heat.model(1.0, 2.0)
        assert m.delta == pytest.approx(math.log(9 / 7), rel=1e-14)
        assert m.delta == pytest.approx(0.25131, abs=1e-5)

    def test_large_r(self):
        m = heat.model(1.0, 1e4)
        assert m.delta < 1e-8
        assert m.rho > 1 - 1e-8

    @pytest.mark.parametrize("gamma,r", [(0.0, 1.0), (-1.0, 2.0), (1.0, 0.5), (1.0, float("nan"))])
    def test_domain(self, gamma, r):
        with pytest.raises(DomainError):
            heat.model(gamma, r)

    def test_coth(self):
        for r in (1.0, 1.7, 5.0):
            m = heat.model(1.0, r)
            assert m.coth_delta == pytest.approx(1 / math.tanh(m.delta), rel=1e-12)


class TestEigenvalues:
    def test_values(self):
        m = heat.model(1.0, 1.0)
        assert heat.eigenvalue(m, 0) == pytest.approx(4 / 9, rel=1e-15)
        assert heat.eigenvalue(m, 1) == pytest.approx(4 / 81, rel=1e-15)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(1.0, 50.0), st.integers(0, 200))
    def test_geometric(self, r, k):
        m = heat.model(1.0, r)
        assert heat.eigenvalue(m, k) / heat.eigenvalue(m, k + 1) == pytest.approx(m.rho ** -2, rel=1e-12)

    @pytest.mark.parametrize("r", [1.0, 2.0, 4.0, 8.0, 3.3])
    def test_sum_is_half_r2(self, r):
        m = heat.model(0.7, r)
        # closed form of the geometric series c^2 rho / (1 - rho^2)
        assert m.c ** 2 * m.rho / (1 - m.rho ** 2) == pytest.approx(r * r / 2, rel=1e-12)
        assert np.sum(m.eigenvalues(1e-20)) == pytest.approx(r * r / 2, rel=1e-12)

    def test_floor(self):
        lam = heat.model(1.0, 2.0).eigenvalues(1e-14)
        assert lam[-1] >= 1e-14 * lam[0] > lam[-1] * heat.model(1.0, 2.0).rho ** 2

    def test_tail_order(self):
        m = heat.model(1.0, 2.0)
        k = m.order_for_tail(1e-4)
        assert m.rho ** (2 * k) < 1e-4 <= m.rho ** (2 * (k - 1))


class TestClosedForms:
    def test_capacity_example(self):
        c = heat.closed_form_capacity(100, 2)
        assert c == pytest.approx(15.72, rel=5e-3)
        assert c / math.log(2) == pytest.approx(22.6, rel=5e-3)

    def test_capacity_r1(self):
        assert heat.closed_form_capacity(100, 1) == pytest.approx(3.93, abs=5e-3)
        assert heat.closed_form_capacity(100, 1) == pytest.approx(heat.closed_form_capacity(100, 2) / 4, rel=1e-15)

    def test_capacity_small_snr(self):
        # near the branch point (W0 + 1)^2 ~ 2 (e x + 1) = 8 pi SNR, so C ~ pi r^2 SNR
        c = heat.closed_form_capacity(1e-9, 1)
        assert c == pytest.approx(math.pi * 1e-9, rel=1e-3)
        assert heat.closed_form_capacity(1e-14, 1) < 1e-12

    def test_capacity_details(self):
        d = heat.closed_form_capacity(100, 2, details=True)
        assert d.argument == pytest.approx((400 * math.pi - 1) / math.e, rel=1e-15)
        assert d.w * math.exp(d.w) == pytest.approx(d.argument, rel=1e-12)
        assert d.branch == "W0"

    def test_rate_values(self):
        assert heat.closed_form_rate(1, 2) == 0.0
        assert heat.closed_form_rate(10, 2) == pytest.approx(7.56, abs=5e-3)

    def test_rate_details(self):
        d = heat.closed_form_rate(10, 2, details=True)
        assert d.argument == pytest.approx(-0.0367879, abs=1e-7)
        assert d.w <= -1

    def test_rate_domain(self):
        with pytest.raises(DomainError):
            heat.closed_form_rate(0.5, 1)

    def test_rate_increasing(self):
        sdr = np.geomspace(1.0, 1e6, 200)
        vals = [heat.closed_form_rate(s, 3) for s in sdr]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_rate_oracle(self):
        # independent elimination: kappa (1 + x) = 1/SDR with x = ln(1/kappa), R = r^2 x^2 / 8
        for sdr in (2.0, 10.0, 100.0):
            lo, hi = 0.0, 100.0
            for _ in range(200):
                x = 0.5 * (lo + hi)
                if math.exp(-x) * (1 + x) > 1 / sdr:
                    lo = x
                else:
                    hi = x
            assert heat.closed_form_rate(sdr, 2) == pytest.approx(4 * x * x / 8, rel=1e-12)

    def test_capacity_oracle(self):
        # (x - 1) e^x + 1 = 4 pi SNR with C = r^2 x^2 / 8
        for snr in (0.1, 1.0, 10.0, 100.0):
            lo, hi = 0.0, 50.0
            for _ in range(200):
                x = 0.5 * (lo + hi)
                if (x - 1) * math.exp(x) + 1 < 4 * math.pi * snr:
                    lo = x
                else:
                    hi = x
            assert heat.closed_form_capacity(snr, 3) == pytest.approx(9 * x * x / 8, rel=1e-12)


class TestEoc:
    def test_example(self):
        e = heat.eoc(0.1, 2)
        four = lambda v: float(f"{v:.4g}")
        assert four(e.a_approx) == 0.2828
        assert four(e.b_approx) == 28.28
        assert four(e.a_exact) == 0.2850
        assert four(e.b_exact) == 28.50

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.01, 100.0), st.floats(1.0, 100.0))
    def test_uncertainty(self, gamma, r):
        e = heat.eoc(gamma, r)
        m = heat.model(gamma, r)
        assert e.a_exact * e.b_exact == pytest.approx(2 * m.coth_delta, rel=1e-12)
        assert e.a_exact * e.b_exact >= 2
        assert e.area_exact >= 2 * math.pi

    def test_large_r(self):
        assert heat.eoc(0.5, 100.0).a_exact / heat.eoc(0.5, 100.0).a_approx == pytest.approx(1, abs=1e-8)


class TestKernelAndEigenfunctions:
    @pytest.mark.parametrize("gamma,r", [(1.0, 1.0), (0.4, 2.0), (1.0, 4.0)])
    def test_expansion_matches_mehler(self, gamma, r):
        t = np.linspace(-6, 6, 97) * gamma * r
        k = heat.analytic_kernel(heat.model(gamma, r), t)
        np.testing.assert_allclose(k, mehler_kernel(r, gamma, t, t), atol=1e-13)

    @pytest.mark.parametrize("r", [1.0, 2.0])
    def test_svd_vectors_are_hermite(self, r):
        m = heat.model(1.0, r)
        op = symbol_to_kernel(m.symbol, r)
        sp = spectrum(op)
        tab = m.basis(15).table(op.grid.t, 15)
        dt = op.grid.dt
        for k in range(16):
            if not sp.lambdas[k] > 1e-8 * sp.lambdas[0]:
                break
            for vec in (sp.f(k), sp.g(k)):
                s = np.sign(vec @ tab[k])
                assert math.sqrt(np.sum((s * vec - tab[k]) ** 2) * dt) < 1e-4
