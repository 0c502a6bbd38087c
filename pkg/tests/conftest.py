import sys

import numpy as np
import pytest
from hypothesis import settings

from degencontrol import (Ball, Box, CoefficientField, Discretization, build_graded_mesh,
                          tag_regions)

settings.register_profile("suite", max_examples=25, deadline=None)
settings.load_profile("suite")

SQUARE = Box(-1.0, 1.0, -1.0, 1.0)


@pytest.fixture(scope="session")
def square_mesh():
    return build_graded_mesh(SQUARE, 0.1)


@pytest.fixture(scope="session")
def fine_square_mesh():
    return build_graded_mesh(SQUARE, 0.05)


@pytest.fixture(scope="session")
def interior_tags(square_mesh):
    return tag_regions(square_mesh, Ball(0.2, 0.0, 0.1), Ball(0.0, 0.0, 0.5), 0.05, "interior")


@pytest.fixture(scope="session")
def offcenter_tags(fine_square_mesh):
    return tag_regions(fine_square_mesh, Ball(0.6, 0.0, 0.1), Ball(0.6, 0.0, 0.2), 0.05,
                       "offcenter")


@pytest.fixture(scope="session")
def interior_disc(square_mesh, interior_tags):
    return Discretization(square_mesh, interior_tags, CoefficientField(1.0), 0.5, 0.025)


@pytest.fixture(scope="session")
def offcenter_disc(fine_square_mesh, offcenter_tags):
    return Discretization(fine_square_mesh, offcenter_tags, CoefficientField(1.0), 0.5, 0.025)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
