"""Weighted Laplacian, damping-normalized spectrum, and system time scales."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import math
import numpy as np

from .equilibrium import OperatingPoint, weighted_laplacian_matrix
from .errors import ParameterError, SwingbenchError
from .grid import DynamicParams, GridNetwork

#: eigenvalues below this fraction of lambda_max count as the zero mode
ZERO_TOL = 1e-9

NOISE_FAST = "noise_fast"
NOISE_SLOW = "noise_slow"
INTERMEDIATE = "intermediate"


@dataclass(frozen=True)
class WeightedLaplacian:
    """Stability matrix of the linearized flow equations (with sign flipped)."""

    matrix: np.ndarray
    source_point: OperatingPoint

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float).copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class SpectralData:
    """Eigenpairs of the damping-normalized Laplacian D^{-1/2} L D^{-1/2}.

    Eigenvalues ascend and the zero mode is clamped to exactly 0;
    eigenvector columns are orthonormal with a deterministic sign
    (largest-magnitude component positive). ``gammas`` holds the per-mode
    sqrt(gamma^2 - 4 lambda_alpha gamma) used by the closed-form solution
    of the constant-ratio dynamics; it is None unless the parameter set
    has a finite homogeneous ratio.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    zero_mode: np.ndarray
    gammas: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("eigenvalues", "eigenvectors", "zero_mode"):
            a = np.asarray(getattr(self, name)).copy()
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if self.gammas is not None:
            g = np.asarray(self.gammas, dtype=complex).copy()
            g.setflags(write=False)
            object.__setattr__(self, "gammas", g)

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]


@dataclass(frozen=True)
class TimeScaleReport:
    """Characteristic times and the noise-regime classification for a tau0."""

    network_times: np.ndarray
    relaxation_time: float
    tau0: float
    regime: str

    def __post_init__(self):
        t = np.asarray(self.network_times, dtype=float).copy()
        t.setflags(write=False)
        object.__setattr__(self, "network_times", t)


def build_laplacian(grid: GridNetwork, point: OperatingPoint) -> WeightedLaplacian:
    """Weighted Laplacian at the operating point: -b_ij cos(theta_i - theta_j)."""
    if point.angles.shape != (grid.n,):
        raise ValueError("operating point does not match the grid size")
    return WeightedLaplacian(
        matrix=weighted_laplacian_matrix(grid, point.angles), source_point=point
    )


def normalize_laplacian(L: WeightedLaplacian, params: DynamicParams) -> np.ndarray:
    """Damping-normalized matrix D^{-1/2} L D^{-1/2} (symmetric, PSD)."""
    d = params.damping
    if d.shape[0] != L.matrix.shape[0]:
        raise ParameterError("parameter vectors do not match the Laplacian size")
    s = 1.0 / np.sqrt(d)
    return (L.matrix * s).T * s


def decompose(LD: np.ndarray, params: DynamicParams) -> SpectralData:
    """Full orthonormal eigendecomposition of the normalized Laplacian.

    Raises if the near-zero eigenspace is not one-dimensional, which
    signals a disconnected effective graph or an unstable source point.
    """
    LD = np.asarray(LD, dtype=float)
    n = LD.shape[0]
    try:
        eigs, U = np.linalg.eigh(LD)
    except np.linalg.LinAlgError as e:
        raise SwingbenchError(f"eigendecomposition failed: {e}") from e

    lam_max = float(eigs[-1]) if n else 0.0
    thr = ZERO_TOL * max(lam_max, 0.0)
    near_zero = int(np.count_nonzero(np.abs(eigs) <= thr))
    if near_zero != 1:
        raise SwingbenchError(
            f"expected exactly one zero eigenvalue, found {near_zero} within "
            f"{thr:g}; effective graph disconnected or point unstable"
        )
    eigs = eigs.copy()
    eigs[0] = 0.0

    # deterministic sign: make the largest-magnitude component positive
    k = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[k, np.arange(n)])
    signs[signs == 0] = 1.0
    U = U * signs

    sqrt_d = np.sqrt(params.damping)
    zero_mode = sqrt_d / np.linalg.norm(sqrt_d)

    gammas = None
    g = params.gamma
    if g is not None and math.isfinite(g):
        gammas = np.sqrt(np.asarray(g * g - 4.0 * eigs * g, dtype=complex))

    return SpectralData(eigenvalues=eigs, eigenvectors=U, zero_mode=zero_mode, gammas=gammas)


def analyze(grid: GridNetwork, point: OperatingPoint, params: DynamicParams) -> SpectralData:
    """Laplacian -> normalization -> eigendecomposition in one call."""
    return decompose(normalize_laplacian(build_laplacian(grid, point), params), params)


def time_scales(spectral: SpectralData, params: DynamicParams, tau0: float) -> TimeScaleReport:
    """Network mode times 1/lambda_alpha, mean relaxation time, regime for tau0."""
    lam = spectral.eigenvalues[1:]
    network_times = 1.0 / lam
    relaxation = float(params.inertia.mean() / params.damping.mean())

    slowest = max(relaxation, float(network_times.max()) if network_times.size else 0.0)
    fastest = min(
        relaxation if relaxation > 0 else math.inf,
        float(network_times.min()) if network_times.size else math.inf,
    )
    if tau0 > 10.0 * slowest:
        regime = NOISE_SLOW
    elif tau0 < 0.1 * fastest:
        regime = NOISE_FAST
    else:
        regime = INTERMEDIATE
    return TimeScaleReport(
        network_times=network_times, relaxation_time=relaxation, tau0=tau0, regime=regime
    )
