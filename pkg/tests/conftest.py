import numpy as np
import pytest

from gsslogit.core import Hyperparams, default_hyperparams, validate_design
from gsslogit.simulate import SimConfig, gen_dataset


def make_frozen_problem(seed=2):
    """r=3 Gaussian selection problem whose exact posterior is spread over several models."""
    rng = np.random.default_rng(seed)
    n = 40
    x = rng.standard_normal((n, 6))
    design = validate_design(x, [[0, 1], [2, 3], [4, 5]])
    beta = np.array([0.45, -0.3, 0.2, 0.0, 0.0, 0.0])
    s2 = rng.uniform(1, 4, n)
    y = design.x @ beta + np.sqrt(s2) * rng.standard_normal(n)
    return design, y, s2, Hyperparams(tau2=1.0, q=0.3)


@pytest.fixture(scope="session")
def frozen_problem():
    return make_frozen_problem()


@pytest.fixture(scope="session")
def small_dataset():
    ds = gen_dataset(SimConfig(n=60, r=8, n_active=2, setting=4, seed=3))
    return ds, default_hyperparams(ds.design.n, ds.design.r)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
