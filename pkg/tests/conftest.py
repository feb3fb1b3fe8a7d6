import numpy as np
import pytest

from histweak.netparse import build_model, fig1_builtin


@pytest.fixture(scope="session")
def fig1():
    return build_model(fig1_builtin(4))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
