import numpy as np
import pytest

from spreadnuts.mixture import GaussianComponent, GaussianMixture

ACCEPTANCE_LINES = []


class Flat:
    """Constant log density: free-particle dynamics."""

    def __init__(self, dimension):
        self.dimension = dimension

    def log_density(self, x):
        return 0.0

    def grad_log_density(self, x):
        return np.zeros(self.dimension)


class Recording:
    """Wraps a target and records every position its gradient is evaluated at."""

    def __init__(self, target):
        self.target = target
        self.dimension = target.dimension
        self.calls = []

    def log_density(self, x):
        return self.target.log_density(x)

    def grad_log_density(self, x):
        return self.log_density_and_grad(x)[1]

    def log_density_and_grad(self, x):
        self.calls.append(np.array(x, copy=True))
        return self.target.log_density_and_grad(x)


def normal_1d(mean=0.0, var=1.0):
    return GaussianMixture([GaussianComponent(np.array([mean]), np.array([[var]]))], weights=[1.0])


@pytest.fixture
def std2():
    return GaussianMixture([GaussianComponent(np.zeros(2), np.eye(2))], weights=[1.0])


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
