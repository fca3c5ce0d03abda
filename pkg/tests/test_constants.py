import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eotlab import constants as K
from eotlab.measures import gaussian, make_marginal, moment


@pytest.fixture(scope="module")
def dm_reference():
    # drift pair chosen so the radii are round numbers
    return K.distorted_metric_constants(1.0, 0.0, (0.5, 1.5), K.drift_constants(1.0, 0.0, 4))


class TestCKP:
    def test_single_evaluation(self):
        m = make_marginal(gaussian())
        assert K.ckp_c1_at(m, 0.25) == pytest.approx(3.2821622023050264, rel=1e-9)

    def test_minimiser_interior(self):
        m = make_marginal(gaussian())
        c1, c2 = K.ckp_constants(m)
        cap = K.CKP_SIGMA_CAP * m.alpha / 2
        for s in (1e-4 * cap, cap):
            assert K.ckp_c1_at(m, s) >= c1 and K.ckp_c2_at(m, s) >= c2

    def test_not_translation_invariant(self):
        a = K.ckp_constants(make_marginal(gaussian(0, 1)))[0]
        b = K.ckp_constants(make_marginal(gaussian(5, 1)))[0]
        assert b > a


class TestEntropyConstant:
    mc = K.MarginalConstants(M1=math.sqrt(2 / math.pi), M2=1.0, C1=3.0, C2=10.0)

    def test_zero_entropy(self):
        A, B = 0.4, 0.3
        mc = self.mc
        expected = 2 * (3 * A * mc.M2 + (A * mc.M1 + B) * mc.M1 + B * mc.M1)
        assert K.entropy_bound_constant(A, B, mc, 0.0) == pytest.approx(expected, rel=1e-15)

    def test_zero_slope(self):
        assert K.entropy_bound_constant(0.0, 0.3, self.mc, 0.0) == pytest.approx(4 * 0.3 * self.mc.M1, rel=1e-15)

    def test_independent_expansion(self):
        # value from a separate high-precision expansion of the same expression
        assert K.entropy_bound_constant(0.43426, 0.30277, self.mc, 0.01) == pytest.approx(4.775529843406102, rel=1e-12)

    def test_sharper_variant_smaller(self):
        d, d_n = K.entropy_bound_constants(0.4, 0.3, self.mc, 0.01, 1e-4)
        assert d_n < d

    def test_negative_entropy_rejected(self):
        with pytest.raises(ValueError):
            K.entropy_bound_constant(0.4, 0.3, self.mc, -1.0)


class TestConditionalMomentBound:
    def test_matches_gaussian_conditionals(self):
        # conditional law of y given x under psi* = a y^2/2 is N(x/(1+Ta), T/(1+Ta))
        T, a = 2.0, 1 / math.sqrt(2)
        x = np.linspace(-5, 5, 41)
        m, s = x / (1 + T * a), math.sqrt(T / (1 + T * a))
        from scipy.stats import norm

        e_abs = m * (2 * norm.cdf(m / s) - 1) + 2 * s * norm.pdf(m / s)
        assert np.all(e_abs <= K.conditional_moment_bound(x, T, a, 0.0, 0.0) + 1e-8)


class TestDrift:
    def test_gaussian_T2(self):
        A, B = K.drift_constants(1.20711, 0.0, 2)
        assert A == pytest.approx(0.603555, abs=1e-12)
        assert B == pytest.approx(1.603555, abs=1e-12)

    @given(st.floats(0.05, 10.0))
    def test_square_completion_without_linear_term(self, a):
        A, B = K.drift_constants(a, 0.0, 2)
        assert B == pytest.approx(1 + A, rel=1e-15)

    @settings(max_examples=40)
    @given(st.floats(0.1, 5.0), st.floats(0.0, 5.0), st.sampled_from([2, 4, 6]))
    def test_lyapunov_inequality_on_worst_case_drift(self, a, c, p):
        # L = (1/2) d^2 - (1/2) W' d with the worst admissible drift W' = a y - c sign(y)
        A, B = K.drift_constants(a, c, p)
        y = np.linspace(-60, 60, 240001)
        V = 1 + np.abs(y) ** p
        dV = p * np.sign(y) * np.abs(y) ** (p - 1)
        d2V = p * (p - 1) * np.abs(y) ** (p - 2)
        LV = 0.5 * d2V - 0.5 * (a * y - c * np.sign(y)) * dV
        assert np.max(LV + A * V) <= B * (1 + 1e-9) + 1e-9

    def test_oracle_potential_drift(self):
        # conditional potential under psi*: W(y) = (1/T + a) y^2 / 2 at x = 0
        T, a = 2.0, 1 / math.sqrt(2)
        A, B = K.drift_constants(a + 1 / T, 0.0, 2)
        y = np.linspace(-50, 50, 100001)
        LV = 0.5 * 2 - 0.5 * (a + 1 / T) * y * 2 * y
        assert np.max(LV + A * (1 + y * y)) <= B + 1e-9


class TestDistortedMetric:
    def test_radii_and_cap(self, dm_reference):
        assert dm_reference.R1 == pytest.approx(2 * math.sqrt(3), rel=1e-15)
        assert dm_reference.R2 == pytest.approx(6.0, rel=1e-15)
        assert dm_reference.C_Delta == 74.0

    def test_epsilon_condition_with_slack(self, dm_reference):
        assert 0 < dm_reference.epsilon < 1
        assert dm_reference.eps_slack() >= 1.01 * (1 - 1e-12)

    def test_small_epsilon_limit(self):
        # with no convexity excess and eps -> 0 the integral tends to R1^2 / 2
        val, err = K.eq_double_integral(0.0, 1e-14, 2.0)
        assert val == pytest.approx(2.0, rel=1e-5)

    def test_shape_of_f(self, dm_reference):
        dm = dm_reference
        r, f = dm.r_grid, dm.f_values
        assert f[0] == 0.0
        assert np.all(np.diff(f) >= 0)
        assert np.all(np.diff(f, 2) <= 1e-12)
        assert dm.f(np.array([dm.R2 + 1, dm.R2 + 100])).tolist() == [dm.f_R2, dm.f_R2]
        ratio = dm.g_values
        assert np.all(ratio >= 0.5 - 1e-12) and np.all(ratio <= 1 + 1e-12)

    def test_derived_constants(self, dm_reference):
        dm = dm_reference
        assert dm.C_I == float(dm.phi(dm.R2))
        assert 0 < dm.C_I <= 1
        assert dm.lam == min(dm.beta_const, dm.drift_A2, 4 * dm.drift_A2 * dm.drift_B2 * dm.epsilon) / 2
        assert dm.lam > 0


@pytest.fixture(scope="module")
def setup_T3():
    T, a = 3.0, 0.767591879243998
    A, B = 0.4342585459106649, 0.3027756377319946
    out = {}
    for x in (0.0, 1.0, 2.0):
        c_lin = x / T
        dm = K.distorted_metric_constants(1.0, 0.0, K.drift_constants(1.0, c_lin, 2), K.drift_constants(1.0, c_lin, 4))
        cx = K.moment_prefactor_cx(x, T, a, 1.0, 0.0, 0.0, 0.0)
        out[x] = K.hessian_rate_constant(x, T, dm, A, B, a, 0.0, 0.0, cx)
    return out


class TestHessianConstant:
    def test_finite_positive(self, setup_T3):
        assert all(math.isfinite(h.value) and h.value > 0 for h in setup_T3.values())

    def test_non_decreasing_in_distance(self, setup_T3):
        v = [setup_T3[x].value for x in (0.0, 1.0, 2.0)]
        assert v[0] <= v[1] <= v[2]

    def test_optimum_interior(self, setup_T3):
        for h in setup_T3.values():
            assert h.t_opt > 0
