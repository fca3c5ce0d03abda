import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eotlab import experiment as E
from eotlab.config import parse_config
from eotlab.coupling import conditional_coupling_check, pair_coupling_check, randomized_suite
from eotlab.measures import gaussian, make_marginal, perturbed_gaussian
from eotlab.sinkhorn import SinkhornProblem, initial_state

from conftest import PERTURBED, UNIT, unit_config


class TestPairCheck:
    @settings(max_examples=15, deadline=None)
    @given(st.floats(-2.0, 2.0))
    def test_translation_is_the_equality_case(self, m):
        # W1 = |m| and the gradient gap is the constant |m|
        res = pair_coupling_check(make_marginal(gaussian(0, 1)), make_marginal(gaussian(m, 1)))
        assert res.lhs == pytest.approx(abs(m), abs=1e-8)
        assert res.rhs == pytest.approx(abs(m), abs=1e-8)
        assert res.passed

    def test_perturbed_pair_has_slack(self):
        res = pair_coupling_check(make_marginal(perturbed_gaussian(0, 1, 0.1, 2)), make_marginal(gaussian(0.3, 1.5)))
        assert res.passed and res.slack > 0

    def test_overclaimed_convexity_can_fail(self):
        # pretending p is 4-convex shrinks the bound below the true distance
        res = pair_coupling_check(make_marginal(gaussian(0, 1)), make_marginal(gaussian(1, 1)), alpha_p=4.0)
        assert not res.passed


def test_randomized_suite_has_no_violations():
    cases = randomized_suite(100, seed=0)
    assert len(cases) == 100
    assert all(c.profile_verified for c in cases)
    assert sum(not c.passed for c in cases) == 0


def test_randomized_suite_is_reproducible():
    a = randomized_suite(5, seed=11, n_nodes=256)
    b = randomized_suite(5, seed=11, n_nodes=256)
    assert [(c.lhs, c.rhs) for c in a] == [(c.lhs, c.rhs) for c in b]


class TestConditionalCheck:
    def test_zero_at_the_fixed_point(self):
        m = make_marginal(gaussian())
        p = SinkhornProblem.build(m, m, 2.0)
        s = initial_state(p)
        res = conditional_coupling_check(s, 0.7, s.psi_values, 0.8, np.zeros(m.grid.size))
        assert res.lhs == 0.0 and res.rhs == 0.0 and res.passed

    @pytest.mark.parametrize(
        "cfg",
        [
            unit_config(2.0),
            parse_config({"marginal_mu": PERTURBED, "marginal_nu": UNIT, "T": 2.0}),
        ],
        ids=["unit_T2", "perturbed_T2"],
    )
    def test_sweep_over_iterations_and_probes(self, cfg):
        probes = E.conditional_coupling_sweep(E.prepare(cfg), n_max=10, n_probe=33)
        assert len(probes) == 11 * 33
        assert all(p.passed for p in probes), [p for p in probes if not p.passed][:3]
        assert math.isfinite(min(p.rhs - p.lhs for p in probes))
