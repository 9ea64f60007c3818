import numpy as np
import pytest

from spreadperc import Window, ball, sample_poisson


@pytest.fixture(scope="session")
def ball2():
    return ball(2)


@pytest.fixture
def small_torus_cloud():
    return sample_poisson(Window.cube(24.0, 2), 1.0, 11)


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    return request.param


def pytest_configure(config):
    np.set_printoptions(precision=6)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
