import math

import numpy as np
import pytest
from scipy.optimize import brentq

from swingbench import (
    Bus,
    ConvergenceError,
    GridNetwork,
    Line,
    OperatingPoint,
    check_stability,
    power_mismatch,
    solve_steady_state,
)


def test_two_bus_closed_form(twobus):
    point = solve_steady_state(twobus)
    # b sin(dtheta) = 1 with b = 2 -> dtheta = pi/6, zero-mean gauge
    np.testing.assert_allclose(point.angles, [math.pi / 12, -math.pi / 12], atol=1e-12)
    assert point.residual_norm <= 1e-8
    assert point.stable


def test_zero_injection_fixed_point():
    g = GridNetwork(
        buses=(Bus(1, "load", 0.0), Bus(2, "load", 0.0), Bus(3, "load", 0.0)),
        lines=(Line(1, 2, 1.0), Line(2, 3, 1.0)),
        unit_system="per_unit",
    )
    point = solve_steady_state(g)
    np.testing.assert_array_equal(point.angles, np.zeros(3))
    assert point.residual_norm == 0.0
    assert point.iterations == 0
    assert point.stable


def test_path3_against_bisection_oracle(path3):
    # independent oracle: each line flow is fixed by the cut balance, so
    # bisect b*sin(delta) = flow per line
    flow_12 = 0.3
    flow_23 = 0.5
    d12 = brentq(lambda d: 1.0 * math.sin(d) - flow_12, 0, math.pi / 2, xtol=1e-14)
    d23 = brentq(lambda d: 1.0 * math.sin(d) - flow_23, 0, math.pi / 2, xtol=1e-14)
    theta_raw = np.array([d12 + d23, d23, 0.0])
    expected = theta_raw - theta_raw.mean()

    point = solve_steady_state(path3, tol=1e-12)
    np.testing.assert_allclose(point.angles, expected, atol=1e-10)
    assert point.residual_norm < 1e-10
    assert point.stable


def test_flow_conservation_is_exact(ieee118):
    point = solve_steady_state(ieee118)
    mism = power_mismatch(ieee118, point.angles)
    scale = np.abs(ieee118.power).max()
    assert abs(mism.sum()) <= 1e-12 * scale


def test_gauge_invariance_of_initial_guess(path3):
    p1 = solve_steady_state(path3, initial_guess=np.array([0.1, 0.0, -0.05]))
    p2 = solve_steady_state(path3, initial_guess=np.array([0.1, 0.0, -0.05]) + 7.25)
    np.testing.assert_allclose(p1.angles, p2.angles, atol=1e-12)


def test_restart_from_solution_is_fixed_point(test10):
    point = solve_steady_state(test10)
    again = solve_steady_state(test10, initial_guess=point.angles)
    assert again.iterations <= 1
    np.testing.assert_allclose(again.angles, point.angles, atol=1e-9)


def test_infeasible_grid_raises():
    g = GridNetwork(
        buses=(Bus(1, "generator", 3.0), Bus(2, "load", -3.0)),
        lines=(Line(1, 2, 1.0),),
        unit_system="per_unit",
    )
    with pytest.raises(ConvergenceError):
        solve_steady_state(g)


class TestStability:
    def test_two_bus_stable_point(self, twobus):
        point = solve_steady_state(twobus)
        assert check_stability(twobus, point) is True

    def test_two_bus_artificial_unstable_point(self, twobus):
        # angle difference 2pi/3 flips the cosine sign
        bad = OperatingPoint(
            angles=np.array([math.pi / 3, -math.pi / 3]),
            residual_norm=0.0,
            stable=False,
        )
        assert check_stability(twobus, bad) is False

    def test_path3_eigenvalues_by_characteristic_polynomial(self, path3):
        point = solve_steady_state(path3)
        w1 = 1.0 * math.cos(point.angles[0] - point.angles[1])
        w2 = 1.0 * math.cos(point.angles[1] - point.angles[2])
        L = np.array([[w1, -w1, 0.0], [-w1, w1 + w2, -w2], [0.0, -w2, w2]])
        # char poly of the 3x3 Laplacian: lam (lam^2 - 2(w1+w2) lam + 3 w1 w2)
        roots = np.roots([1.0, -2.0 * (w1 + w2), 3.0 * w1 * w2])
        expected = np.sort(np.concatenate([[0.0], roots]))
        np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(L)), expected, atol=1e-12)
        assert np.all(expected >= -1e-12)
        assert check_stability(path3, point) is True
