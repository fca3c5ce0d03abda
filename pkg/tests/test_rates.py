import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eotlab.measures import gaussian, perturbed_gaussian
from eotlab.oracle import alpha_limit_closed_form
from eotlab.profiles import tanh_profile, zero_profile
from eotlab.rates import (
    MU,
    NU,
    F,
    G,
    RateCertificate,
    RateParams,
    alpha_sequence,
    certify,
    gamma_from_alpha,
    gamma_limit_strongly_log_concave,
    gamma_recursion_strongly_log_concave,
    gamma_tanh_display,
    init_linear_growth,
    rate_params_from_dict,
    rate_params_to_dict,
    sufficient_T,
)

Z = zero_profile()
INF = math.inf


def slc(a_mu=1.0, a_nu=1.0, b_mu=1.0, b_nu=1.0, T=1.0):
    return RateParams(alpha_mu=a_mu, alpha_nu=a_nu, beta_mu=b_mu, beta_nu=b_nu, T=T)


class TestF:
    def test_substitution(self):
        assert F(1.0, Z, Z, 0.0, 1.0, 1.0) == 2.0

    def test_origin(self):
        assert F(3.0, tanh_profile(1.0), tanh_profile(2.0), 0.5, 2.0, 0.0) == 0.0

    def test_infinite_beta(self):
        assert F(INF, Z, Z, 0.0, 1.0, 1.0) == INF

    def test_domain(self):
        with pytest.raises(ValueError):
            F(1.0, Z, Z, -1.0, 1.0, 1.0)

    @given(st.floats(0.2, 5.0), st.floats(0.1, 3.0), st.floats(0.0, 2.0), st.floats(0.3, 4.0))
    def test_increasing_and_concave(self, beta, L, alpha, T):
        g = tanh_profile(L)
        s = np.linspace(0.01, 5.0, 60)
        v = np.array([F(beta, g, g, alpha, T, x) for x in s])
        d1 = np.diff(v)
        d2 = np.diff(v, 2)
        assert np.all(d1 > 0)
        assert np.all(d2 <= 1e-10 * max(1.0, np.max(np.abs(v))))


class TestG:
    def test_linear_case(self):
        assert G(1.0, Z, Z, 0.0, 1.0, 2.0) == pytest.approx(1.0, rel=1e-12)

    def test_infinite_beta_convention(self):
        assert G(INF, tanh_profile(1.0), Z, 0.3, 1.0, 2.0) == 0.0

    def test_nonzero_alpha(self):
        assert G(1.0, Z, Z, 1.0, 1.0, 2.0) == pytest.approx(4.0 / 3.0, rel=1e-12)

    @given(st.floats(0.2, 5.0), st.floats(0.05, 3.0), st.floats(0.3, 4.0), st.floats(0.0, 3.0), st.floats(0.0, 3.0))
    def test_bounded_and_monotone_in_alpha(self, beta, L, T, a1, a2):
        g = tanh_profile(L)
        lo, hi = sorted((a1, a2))
        lo -= 0.99 / T
        G_lo, G_hi = G(beta, g, g, lo, T, 2.0), G(beta, g, g, hi, T, 2.0)
        assert 0 < G_lo <= G_hi <= 2.0 / beta * (1 + 1e-15)


class TestAlphaSchedules:
    def test_nu_side_golden_ratio(self):
        s = alpha_sequence(slc(T=1.0), NU, 5)
        assert s.values[0] == 0.0
        assert s.values[1] == pytest.approx(0.5, abs=1e-12)
        assert s.limit == pytest.approx((math.sqrt(5) - 1) / 2, abs=1e-10)

    def test_infinite_beta_gives_constant_schedule(self):
        s = alpha_sequence(slc(b_mu=INF, T=2.0), NU, 6)
        assert set(s.values) == {0.5}
        assert s.limit == 0.5

    def test_mu_side_T2(self):
        assert alpha_sequence(slc(T=2.0), MU, 3).limit == pytest.approx(math.sqrt(2) / 2, abs=1e-10)

    @settings(max_examples=40)
    @given(st.floats(0.2, 3.0), st.floats(0.2, 3.0), st.floats(0.3, 5.0))
    def test_bridge_to_strongly_log_concave_recursion(self, a, b, T):
        p = slc(a_nu=a, b_mu=b, T=T)
        s = alpha_sequence(p, NU, 20)
        ref = [a - 1 / T]
        for _ in range(19):
            ref.append(a - 1 / T + 1 / (T * T * b + 1 / (ref[-1] + 1 / T)))
        assert np.allclose(s.values[:20], ref, rtol=0, atol=1e-12)
        assert s.limit == pytest.approx(alpha_limit_closed_form(a, b, T), abs=1e-10)

    @settings(max_examples=30)
    @given(st.floats(0.3, 3.0), st.floats(0.0, 0.1), st.floats(1.0, 2.0), st.floats(0.5, 5.0))
    def test_monotone_and_in_interval(self, var, amp, freq, T):
        fm = perturbed_gaussian(0, 1.0, amp, freq)
        fn = gaussian(0, var)
        p = RateParams.from_marginals(fm, fn, T)
        for side, (alpha, beta_other) in ((MU, (fm.alpha, fn.beta)), (NU, (fn.alpha, fm.beta))):
            s = alpha_sequence(p, side, 10, 1e-10)
            v = np.array(s.values)
            assert np.all(np.diff(v) >= -1e-15)
            assert np.all(v > alpha - 1 / T - 1e-15)
            assert np.all(v <= alpha - 1 / T + 1 / (beta_other * T * T) + 1e-12)
            assert s.fixed_point_residual < 1e-10


class TestGamma:
    def test_unit_T1_sequence(self):
        c = certify(slc(T=1.0), 5, 0.0, 0.0)
        assert c.gamma_mu[0] == pytest.approx(1.0, abs=1e-12)
        assert c.gamma_mu[1] == pytest.approx(2 / 3, abs=1e-12)
        assert c.gamma_inf_mu == pytest.approx(2 / (1 + math.sqrt(5)), abs=1e-10)

    def test_infinite_beta_T2(self):
        c = certify(slc(b_mu=INF, b_nu=INF, T=2.0), 5, 0.0, 0.0)
        assert c.gamma_inf_mu == c.gamma_inf_nu == 1.0
        assert c.product_rho == 0.25 and c.contraction_certified

    def test_tanh_profile_general_formula(self):
        # theta = 2, L = 1: R = 4, gamma = cosh^4(R sqrt(L)/2)/(theta + L) = cosh^4(2)/3
        assert gamma_from_alpha(1.5, tanh_profile(1.0), 2.0) == pytest.approx(66.77967052484350, rel=1e-12)

    def test_tanh_display_variant_differs(self):
        g = tanh_profile(1.0)
        assert gamma_tanh_display(1.5, g, 2.0) != pytest.approx(gamma_from_alpha(1.5, g, 2.0))
        assert gamma_tanh_display(1.5, Z, 2.0) is None

    @settings(max_examples=40)
    @given(st.floats(0.2, 3.0), st.floats(0.2, 3.0), st.floats(0.3, 5.0))
    def test_bridge_to_closed_form_gamma(self, a, b, T):
        c = certify(slc(a_mu=a, b_nu=b, T=T), 15, 0.0, 0.0)
        ref = gamma_recursion_strongly_log_concave(a, b, T, 15)
        assert np.allclose(c.gamma_mu[:15], ref, rtol=1e-12, atol=0)
        assert c.gamma_inf_mu == pytest.approx(gamma_limit_strongly_log_concave(a, b, T), rel=1e-10)

    @settings(max_examples=30)
    @given(st.floats(0.3, 3.0), st.floats(0.0, 0.1), st.floats(0.5, 8.0))
    def test_sequences_non_increasing(self, var, amp, T):
        p = RateParams.from_marginals(perturbed_gaussian(0, var, amp, 1.5), gaussian(0, var), T)
        c = certify(p, 12, 0.0, 0.0)
        for seq in (c.gamma_mu, c.gamma_nu, c.hat_gamma_mu, c.hat_gamma_nu):
            assert np.all(np.diff(np.array(seq)) <= 1e-12 * np.array(seq[:-1]))
        assert c.product_rho > 0
        assert all(h >= g for h, g in zip(c.hat_gamma_mu, c.gamma_mu))


class TestThresholds:
    def test_infinite_beta(self):
        t = sufficient_T(slc(b_mu=INF, b_nu=INF, T=0.5))
        assert t["branch"] == "beta_infinite" and t["threshold"] == 1.0

    def test_equal_alpha_beta_gives_zero(self):
        t = sufficient_T(slc(T=0.01))
        assert t["threshold"] == 0.0 and t["certified"]

    def test_closed_formula(self):
        assert sufficient_T(slc(b_mu=2.0, b_nu=2.0))["threshold"] == pytest.approx(0.5, abs=1e-15)

    def test_profile_branch(self):
        p = RateParams.from_marginals(perturbed_gaussian(0, 1, 0.1, 2), gaussian(0, 1), 2.0)
        t = sufficient_T(p)
        assert t["branch"] == "profile" and not t["certified"]


class TestInitialisation:
    def test_symmetric_T2(self):
        A, B = init_linear_growth(math.sqrt(2) / 2, 2.0, 0.0, 0.0)
        assert A == pytest.approx(1 / math.sqrt(2), abs=1e-12)
        assert B == pytest.approx(math.sqrt(2) - 1, abs=1e-12)

    def test_T3(self):
        A, B = init_linear_growth(0.767591879243998, 3.0, 0.0, 0.0)
        assert A == pytest.approx(0.4342585459106649, abs=1e-12)
        assert B == pytest.approx(0.3027756377319946, abs=1e-12)

    def test_large_T_limit(self):
        A, B = init_linear_growth(0.9, 1e8, 0.0, 0.0)
        assert A < 1e-7 and B < 1e-7

    def test_pointwise_rates_T3(self):
        c = certify(RateParams.from_marginals(gaussian(), gaussian(), 3.0), 40, 0.0, 0.0)
        assert c.gamma_inf_mu == pytest.approx(0.9083269131959839, rel=1e-9)
        assert c.hat_gamma_inf_mu == pytest.approx(2.091673086804016, rel=1e-9)
        assert c.pointwise_rho == pytest.approx(0.48612181134002677, rel=1e-9)
        assert c.pointwise_certified

    def test_pointwise_borderline_T2(self):
        c = certify(RateParams.from_marginals(gaussian(), gaussian(), 2.0), 40, 0.0, 0.0)
        assert c.pointwise_rho == pytest.approx(1.0, abs=1e-9)
        assert not c.pointwise_certified


def test_certificate_round_trip():
    p = RateParams.from_marginals(perturbed_gaussian(0, 1, 0.1, 2), gaussian(0, 1), 80.0)
    c = certify(p, 10, 0.01, -0.02)
    assert RateCertificate.from_dict(c.to_dict()) == c
    q = rate_params_from_dict(rate_params_to_dict(p))
    assert rate_params_to_dict(q) == rate_params_to_dict(p)
