import numpy as np
import pytest

from robust_dfl.pipeline import Dataset
from robust_dfl.simulator import reference_scenario


@pytest.fixture(scope="session")
def windy():
    return Dataset.from_scenario(reference_scenario("windy"))


@pytest.fixture(scope="session")
def calm():
    return Dataset.from_scenario(reference_scenario("calm"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = next((m for n, m in list(sys.modules.items()) if n.endswith("test_acceptance")), None)
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
