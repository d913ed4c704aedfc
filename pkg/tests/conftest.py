import numpy as np
import pytest

from mprk import _kernels


@pytest.fixture(scope="session", autouse=True)
def _compile_kernels():
    _kernels.warmup()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
