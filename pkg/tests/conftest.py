import numpy as np
import pytest

from rjmlt.lt.scene import cornell_box


@pytest.fixture(scope="session")
def cornell():
    return cornell_box()


@pytest.fixture(scope="session")
def tiny_cornell():
    return cornell_box(resolution=(8, 8))


@pytest.fixture
def nprng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def diffuse_cornell():
    return cornell_box(mixture_sphere=False)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES
    if LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for k in sorted(LINES):
            terminalreporter.write_line(LINES[k])
