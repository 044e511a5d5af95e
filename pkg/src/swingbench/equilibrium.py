"""Synchronous operating state of the lossless grid.

Solves P_i = sum_j b_ij sin(theta_i - theta_j) for the stationary angles
and certifies linear stability of the solution through the spectrum of
the angle-dependent weighted Laplacian.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConvergenceError
from .grid import GridNetwork

RESIDUAL_TOL = 1e-8
#: eigenvalues below this fraction of lambda_max count as the zero mode
ZERO_MODE_RTOL = 1e-9


@dataclass(frozen=True)
class OperatingPoint:
    """Gauge-fixed stationary angles with solver diagnostics.

    Angles satisfy sum_i theta_i = 0; ``residual_norm`` is the worst-case
    power mismatch max_i |P_i - sum_j b_ij sin(theta_i - theta_j)|.
    """

    angles: np.ndarray
    residual_norm: float
    stable: bool
    iterations: int = 0

    def __post_init__(self):
        a = np.asarray(self.angles, dtype=float).copy()
        a.setflags(write=False)
        object.__setattr__(self, "angles", a)


def power_mismatch(grid: GridNetwork, angles: np.ndarray) -> np.ndarray:
    """P_i minus the line flows leaving node i."""
    i, j, b = grid.edges
    flow = b * np.sin(angles[i] - angles[j])
    out = grid.power.copy()
    np.subtract.at(out, i, flow)
    np.add.at(out, j, flow)
    return out


def weighted_laplacian_matrix(grid: GridNetwork, angles: np.ndarray) -> np.ndarray:
    """Matrix with off-diagonals -b_ij cos(theta_i - theta_j), zero row sums."""
    i, j, b = grid.edges
    w = b * np.cos(angles[i] - angles[j])
    L = np.zeros((grid.n, grid.n))
    L[i, j] -= w
    L[j, i] -= w
    np.add.at(np.einsum("ii->i", L), i, w)
    np.add.at(np.einsum("ii->i", L), j, w)
    return L


def check_stability(grid: GridNetwork, point: OperatingPoint) -> bool:
    """True iff the weighted Laplacian at the point is PSD with a 1-d kernel."""
    return _spectrum_is_stable(weighted_laplacian_matrix(grid, point.angles))


def _spectrum_is_stable(L: np.ndarray) -> bool:
    eigs = np.linalg.eigvalsh(L)
    lam_max = eigs[-1]
    thr = ZERO_MODE_RTOL * lam_max
    if np.any(eigs < -thr):
        return False
    return int(np.count_nonzero(np.abs(eigs) <= thr)) == 1


def solve_steady_state(
    grid: GridNetwork,
    initial_guess: Optional[np.ndarray] = None,
    max_iter: int = 50,
    tol: float = RESIDUAL_TOL,
) -> OperatingPoint:
    """Newton-Raphson solve for the synchronous state.

    One angle is eliminated by the gauge freedom (the mismatch vector
    always sums to zero on a balanced grid), the remaining system is
    solved with damped Newton steps, and the result is shifted to zero
    mean. Convergence to a linearly unstable solution is reported via
    ``stable=False`` rather than raised.
    """
    n = grid.n
    if initial_guess is not None:
        theta = np.asarray(initial_guess, dtype=float).copy()
        if theta.shape != (n,):
            raise ValueError(f"initial_guess must have shape ({n},)")
        theta -= theta.mean()
    else:
        theta = np.zeros(n)

    mism = power_mismatch(grid, theta)
    res = float(np.max(np.abs(mism))) if n else 0.0
    iterations = 0
    for _ in range(max_iter):
        if res <= tol:
            break
        L = weighted_laplacian_matrix(grid, theta)
        try:
            step_red = np.linalg.solve(L[:-1, :-1], mism[:-1])
        except np.linalg.LinAlgError as e:
            raise ConvergenceError(
                f"singular Jacobian after {iterations} Newton iterations "
                f"(residual {res:g}); the grid may have no nearby operating point"
            ) from e
        step = np.concatenate([step_red, [0.0]])

        # backtracking on the squared mismatch
        phi0 = float(mism @ mism)
        scale = 1.0
        while True:
            trial = theta + scale * step
            trial_mism = power_mismatch(grid, trial)
            if float(trial_mism @ trial_mism) <= (1.0 - 1e-4 * scale) * phi0:
                break
            scale *= 0.5
            if scale < 1e-10:
                raise ConvergenceError(
                    f"line search stalled after {iterations} Newton iterations "
                    f"(residual {res:g})"
                )
        theta = trial
        mism = trial_mism
        res = float(np.max(np.abs(mism)))
        iterations += 1
    else:
        if res > tol:
            raise ConvergenceError(
                f"steady state not found in {max_iter} Newton iterations "
                f"(residual {res:g} > {tol:g})"
            )

    theta = theta - theta.mean()
    stable = _spectrum_is_stable(weighted_laplacian_matrix(grid, theta))
    return OperatingPoint(
        angles=theta, residual_norm=res, stable=stable, iterations=iterations
    )
