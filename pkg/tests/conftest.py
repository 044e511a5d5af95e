import numpy as np
import pytest

from swingbench import analyze, assign_parameters, solve_steady_state
from swingbench import cases


@pytest.fixture(scope="session")
def twobus():
    return cases.load_case("twobus")


@pytest.fixture(scope="session")
def path3():
    return cases.load_case("path3")


@pytest.fixture(scope="session")
def test10():
    return cases.load_case("test10")


@pytest.fixture(scope="session")
def ieee118():
    return cases.load_case("ieee118")


@pytest.fixture(scope="session")
def sub30():
    return cases.load_case("ieee118_sub30")


@pytest.fixture(scope="session")
def test10_setup(test10):
    """(grid, params, point, spectral) for the 10-bus homogeneous case."""
    point = solve_steady_state(test10)
    params = assign_parameters(test10, "homogeneous_ratio", alpha=1.5, gamma=0.4)
    return test10, params, point, analyze(test10, point, params)


@pytest.fixture(scope="session")
def ieee118_setup(ieee118):
    point = solve_steady_state(ieee118)
    params = assign_parameters(ieee118, "homogeneous_ratio", alpha=1.5, gamma=0.4)
    return ieee118, params, point, analyze(ieee118, point, params)
