"""Primary-control-effort metric: trajectory integrals, closed forms, ensembles.

The metric is the time-averaged, damping-weighted squared spread of nodal
frequencies around their damping-weighted mean. For noise with a
node-independent damping-to-inertia ratio it has a closed ensemble
average (``analytic_general``) with simple short- and long-correlation
asymptotics (``analytic_short``, ``analytic_long``); the long-time form
contains no inertia at all and is evaluated for arbitrary parameter sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .dynamics import (
    ModalTrajectory,
    SimulationConfig,
    Trajectory,
    modal_ensemble_metrics,
    physical_ensemble_metrics,
)
from .equilibrium import OperatingPoint
from .errors import ParameterError, SimulationError
from .grid import DynamicParams, GridNetwork
from .noise import NoiseSpec
from .spectral import SpectralData, TimeScaleReport, analyze, time_scales


@dataclass(frozen=True)
class MetricReport:
    """Numeric metric next to its closed-form predictions for one setup.

    ``analytic_short`` is None when the white-noise form diverges
    (zero-inertia disturbed node); reports render that as "diverges".
    """

    numeric_P: Optional[float]
    T: Optional[float]
    analytic_general: float
    analytic_short: Optional[float]
    analytic_long: float
    regime: str
    tau0: float


@dataclass(frozen=True)
class EnsembleStats:
    """Mean/std of the metric over independent noise realizations."""

    mean: float
    std: Optional[float]
    count: int
    values: tuple[float, ...]
    per_T_series: tuple[tuple[float, float, Optional[float]], ...] = ()


def stats_from_values(values: Sequence[float], per_T=()) -> EnsembleStats:
    vals = tuple(float(v) for v in values)
    if not vals:
        raise ValueError("no ensemble values")
    mean = float(np.mean(vals))
    std = float(np.std(vals, ddof=1)) if len(vals) >= 2 else None
    return EnsembleStats(mean=mean, std=std, count=len(vals), values=vals, per_T_series=tuple(per_T))


# ---------------------------------------------------------------------------
# trajectory integrals
# ---------------------------------------------------------------------------

def control_effort(traj: Trajectory, params: DynamicParams) -> float:
    """Time-averaged d-weighted squared frequency spread of a trajectory.

    Trapezoidal integral of sum_i d_i (w_i - wbar)^2 with the
    damping-weighted mean wbar(t) = sum_i d_i w_i / sum_i d_i, divided by
    the record span.
    """
    w = traj.frequencies
    if w.shape[0] != params.n:
        raise ParameterError("trajectory and parameter sizes do not match")
    d = params.damping
    span = float(traj.times[-1] - traj.times[0])
    if span <= 0:
        raise SimulationError("trajectory must span a positive window")
    mean = (d @ w) / d.sum()
    dev = w - mean
    s = d @ (dev * dev)
    return float(np.trapezoid(s, traj.times)) / span


def control_effort_modal(modal: ModalTrajectory, T: float) -> float:
    """Same metric from mode velocities: (1/T) integral of sum_a cdot_a^2."""
    span = float(modal.times[-1] - modal.times[0])
    if span <= 0:
        raise SimulationError("modal trajectory must span a positive window")
    if abs(span - T) > 1e-9 * max(T, span):
        raise SimulationError(f"modal trajectory spans {span:g}, not T={T:g}")
    s = np.einsum("mk,mk->k", modal.derivatives, modal.derivatives)
    return float(np.trapezoid(s, modal.times)) / T


# ---------------------------------------------------------------------------
# closed-form ensemble averages
# ---------------------------------------------------------------------------

def _mode_weights(spectral: SpectralData, params: DynamicParams,
                  spec: NoiseSpec, grid: GridNetwork) -> np.ndarray:
    """F_alpha = sum_{disturbed i} amp_i^2 u_{alpha,i}^2 / d_i for alpha >= 2."""
    cols = [grid.bus_index[node] for node in spec.nodes]
    u = spectral.eigenvectors[cols, 1:]  # (S, n-1)
    amps = np.asarray(spec.amplitudes)
    d = params.damping[cols]
    return ((amps * amps / d)[:, None] * (u * u)).sum(axis=0)


def analytic_general(spectral: SpectralData, params: DynamicParams,
                     spec: NoiseSpec, grid: GridNetwork) -> float:
    """Closed-form stationary ensemble average of the metric.

    Valid under a node-independent damping-to-inertia ratio; the
    inertialess limit enters through a vanishing ratio term.
    """
    if params.gamma is None:
        raise ParameterError(
            "the closed-form average requires a node-independent damping-to-inertia ratio"
        )
    inv_gamma = params.inv_gamma
    lam = spectral.eigenvalues[1:]
    F = _mode_weights(spectral, params, spec, grid)
    denom = lam * spec.tau0 + 1.0 + inv_gamma / spec.tau0
    return float((F / denom).sum())


def analytic_short(params: DynamicParams, spec: NoiseSpec,
                   grid: GridNetwork) -> Optional[float]:
    """Short-correlation (white-noise) asymptotic of the average metric.

    Returns None when a disturbed node has zero inertia: the formula
    diverges there, which is exactly the regime where the white-noise
    theory stops applying off inertial nodes.
    """
    idx = [grid.bus_index[node] for node in spec.nodes]
    m = params.inertia
    m_dist = m[idx]
    if np.any(m_dist == 0):
        return None
    amps = np.asarray(spec.amplitudes)
    m_total = float(m.sum())
    return float(spec.tau0 * np.sum(amps * amps * (1.0 / m_dist - 1.0 / m_total)))


def analytic_long(spectral: SpectralData, params: DynamicParams,
                  spec: NoiseSpec, grid: GridNetwork) -> float:
    """Long-correlation asymptotic: inertia-independent by construction."""
    lam = spectral.eigenvalues[1:]
    F = _mode_weights(spectral, params, spec, grid)
    return float((F / lam).sum() / spec.tau0)


def metric_report(
    spectral: SpectralData,
    params: DynamicParams,
    spec: NoiseSpec,
    grid: GridNetwork,
    numeric_P: Optional[float] = None,
    T: Optional[float] = None,
    scales: Optional[TimeScaleReport] = None,
) -> MetricReport:
    """Bundle numeric and closed-form values with the regime classification."""
    if scales is None:
        scales = time_scales(spectral, params, spec.tau0)
    general = (
        analytic_general(spectral, params, spec, grid)
        if params.gamma is not None
        else math.nan
    )
    return MetricReport(
        numeric_P=numeric_P,
        T=T,
        analytic_general=general,
        analytic_short=analytic_short(params, spec, grid),
        analytic_long=analytic_long(spectral, params, spec, grid),
        regime=scales.regime,
        tau0=spec.tau0,
    )


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------

def default_warmup(spectral: SpectralData, params: DynamicParams, factor: float = 10.0) -> float:
    """Transient-discard horizon: a multiple of the slowest relaxation.

    From rest, the metric's expectation approaches its stationary value
    at the local relaxation rates d_i/m_i and the slowest network time;
    measuring after ``factor`` times the slowest of those removes the
    finite-horizon bias regardless of the noise correlation time (the
    noise itself starts stationary).
    """
    with np.errstate(divide="ignore"):
        local = params.inertia / params.damping
    slowest = float(local.max()) if local.size else 0.0
    lam2 = float(spectral.eigenvalues[1])
    slowest = max(slowest, 1.0 / lam2)
    return factor * slowest


def ensemble_run(
    grid: GridNetwork,
    params: DynamicParams,
    point: OperatingPoint,
    noise_spec_template: NoiseSpec,
    count: int,
    config: SimulationConfig,
    warmup: Optional[float] = None,
    T_list: Optional[Sequence[float]] = None,
    spectral: Optional[SpectralData] = None,
) -> EnsembleStats:
    """Metric statistics over ``count`` independent noise realizations.

    Ensemble members reuse the template's seed with derived member
    streams. The backend follows ``config.model``: the modal engine needs
    a homogeneous damping-to-inertia ratio, the nonlinear/linear engines
    work for any parameter set. Each member integrates from the operating
    point at rest; the metric window of length ``config.T`` opens after a
    warm-up (default: ten times the slowest relaxation time) so that the
    reported values estimate the stationary metric.

    ``T_list`` additionally sweeps window lengths for the
    variance-scaling study and fills ``per_T_series``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if spectral is None:
        spectral = analyze(grid, point, params)
    if warmup is None:
        warmup = default_warmup(spectral, params)

    def run(T: float) -> np.ndarray:
        if config.model == "modal":
            vals = modal_ensemble_metrics(
                spectral, params, grid, [noise_spec_template], count, T, warmup,
                h=min(config.dt, T / 2),
            )
        else:
            vals = physical_ensemble_metrics(
                grid, params, point, [noise_spec_template], count,
                config.model, config.dt, T, warmup,
            )
        return vals[0]

    per_T = []
    if T_list is not None:
        for T in T_list:
            v = run(float(T))
            per_T.append(
                (float(T), float(v.mean()), float(np.std(v, ddof=1)) if count >= 2 else None)
            )
    values = run(config.T)
    return stats_from_values(values, per_T=per_T)


def rank_nodes(
    grid: GridNetwork,
    params: DynamicParams,
    spectral: SpectralData,
    tau0: float,
    amplitude_rule: Optional[Callable[[GridNetwork, int], float]] = None,
) -> list[tuple[int, float]]:
    """Buses ordered by the long-correlation metric for single-node noise.

    Equal unit amplitudes by default, so the ranking reflects network
    structure alone; descending order, ties broken by bus id. The value
    contains no inertia, making the ranking valid for any inertia profile.
    """
    lam = spectral.eigenvalues[1:]
    u2 = spectral.eigenvectors[:, 1:] ** 2  # (n, n-1)
    d = params.damping
    out = []
    for k, bus in enumerate(grid.buses):
        amp = 1.0 if amplitude_rule is None else float(amplitude_rule(grid, bus.id))
        val = float((amp * amp / d[k]) * (u2[k] / lam).sum() / tau0)
        out.append((bus.id, val))
    out.sort(key=lambda t: (-t[1], t[0]))
    return out
