import pytest

from eotlab import experiment as E
from eotlab.config import parse_config
from eotlab.measures import gaussian, make_marginal, perturbed_gaussian
from eotlab.sinkhorn import SinkhornProblem

UNIT = {"family": "gaussian", "mean": 0.0, "variance": 1.0}
PERTURBED = {"family": "perturbed_gaussian", "mean": 0.0, "variance": 1.0, "amplitude": 0.1, "frequency": 2.0}


def unit_config(T, **extra):
    return parse_config({"marginal_mu": UNIT, "marginal_nu": UNIT, "T": T, **extra})


@pytest.fixture(scope="session")
def gauss_run_T2():
    return E.run(unit_config(2.0))


@pytest.fixture(scope="session")
def gauss_run_T3():
    return E.run(unit_config(3.0))


@pytest.fixture(scope="session")
def perturbed_run_T2():
    return E.run(parse_config({"marginal_mu": PERTURBED, "marginal_nu": UNIT, "T": 2.0}))


@pytest.fixture(scope="session")
def unit_marginal():
    return make_marginal(gaussian(0.0, 1.0))


@pytest.fixture(scope="session")
def perturbed_marginal():
    return make_marginal(perturbed_gaussian(0.0, 1.0, 0.1, 2.0))


@pytest.fixture(scope="session")
def unit_problem_T2(unit_marginal):
    return SinkhornProblem.build(unit_marginal, unit_marginal, 2.0)


# acceptance lines collected by test_acceptance.py, echoed in the terminal summary
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
