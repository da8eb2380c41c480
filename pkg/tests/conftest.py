import sys

import numpy as np
import pytest

from kglab.geometry import make_model
from kglab.spectral import build_partition, solve_eigenfunctions, uniform_lambda_grid


@pytest.fixture(scope="session")
def free_model():
    return make_model("euclidean", (), 3, 40.0, 0.02)


@pytest.fixture(scope="session")
def free_table(free_model):
    return solve_eigenfunctions(free_model, uniform_lambda_grid(free_model, 24.0))


@pytest.fixture(scope="session")
def bump_model():
    return make_model("perturbed_conic", (0.1, 1.0, 3.0), 3, 40.0, 0.02)


@pytest.fixture(scope="session")
def bump_table(bump_model):
    return solve_eigenfunctions(bump_model, uniform_lambda_grid(bump_model, 64.0))


@pytest.fixture(scope="session")
def partition():
    return build_partition(0, 5)


def gaussian(model, center=0.0, width=1.0):
    return np.exp(-((model.r - center) / width) ** 2)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.LINES:
        terminalreporter.section("acceptance criteria")
        for line in mod.LINES:
            terminalreporter.write_line(line)
