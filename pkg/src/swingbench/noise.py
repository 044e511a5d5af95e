"""Exponentially correlated Gaussian disturbances (vector OU process).

Each disturbed node carries an independent stationary Ornstein-Uhlenbeck
stream with standard deviation ``amplitude`` and autocorrelation
``exp(-|t-t'| / tau0)``. Sampling uses the exact discretization

    x[k+1] = x[k] * exp(-dt/tau0) + amp * sqrt(1 - exp(-2 dt/tau0)) * xi[k]

with x[0] drawn from the stationary law, so the sampled statistics are
correct for any step size. Streams come from counter-based Philox
generators keyed by (seed, member, node id), which makes every path a
pure function of its specification.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import NoiseError
from .grid import GridNetwork


@dataclass(frozen=True)
class NoiseSpec:
    """Which nodes are disturbed, how strongly, and with what memory."""

    nodes: tuple[int, ...]
    amplitudes: tuple[float, ...]
    tau0: float
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(int(v) for v in self.nodes))
        object.__setattr__(self, "amplitudes", tuple(float(a) for a in self.amplitudes))
        if len(self.nodes) == 0:
            raise NoiseError("at least one disturbed node is required")
        if len(set(self.nodes)) != len(self.nodes):
            raise NoiseError("disturbed node ids must be unique")
        if len(self.amplitudes) != len(self.nodes):
            raise NoiseError("amplitudes and nodes must have the same length")
        if any(a < 0 for a in self.amplitudes):
            raise NoiseError("amplitudes must be >= 0")
        if not self.tau0 > 0:
            raise NoiseError("tau0 must be > 0")
        if not (0 <= self.seed < 2**63):
            raise NoiseError("seed must be a non-negative 63-bit integer")

    def amplitude_of(self, node: int) -> float:
        return self.amplitudes[self.nodes.index(node)]


@dataclass(frozen=True)
class NoisePath:
    """Sampled realization on a uniform grid, rows in grid bus order.

    Rows of undisturbed nodes are identically zero. The path is a
    deterministic function of (spec, T, dt, member).
    """

    times: np.ndarray
    values: np.ndarray
    bus_ids: tuple[int, ...]

    def __post_init__(self):
        for name in ("times", "values"):
            a = np.asarray(getattr(self, name), dtype=float).copy()
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        object.__setattr__(self, "bus_ids", tuple(self.bus_ids))

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def steps(self) -> int:
        return self.times.shape[0] - 1


def stream_key(seed: int, member: int, node: int) -> np.ndarray:
    """128-bit Philox key for one (run, node) stream."""
    if not (0 <= node < 2**32):
        raise NoiseError(f"node id {node} outside the 32-bit stream-key range")
    if not (0 <= member < 2**32):
        raise NoiseError(f"member index {member} outside the 32-bit stream-key range")
    return np.array([seed, (member << 32) | node], dtype=np.uint64)


def _unit_ou(gen: np.random.Generator, r: float, steps: int) -> np.ndarray:
    """Unit-variance stationary OU samples, length steps+1."""
    x0 = gen.standard_normal()
    xi = gen.standard_normal(steps)
    out = np.empty(steps + 1)
    out[0] = x0
    if steps:
        q = np.sqrt(1.0 - r * r)
        out[1:] = lfilter([q], [1.0, -r], xi, zi=np.array([r * x0]))[0]
    return out


def generate_noise(
    spec: NoiseSpec,
    T: float,
    dt: float,
    grid: GridNetwork,
    member: int = 0,
    _check_dt: bool = True,
) -> NoisePath:
    """Sample one realization of the disturbance over [0, T].

    The grid supplies the bus ordering for the value matrix. ``member``
    selects an independent ensemble stream without changing the seed.
    The step must resolve the correlation (dt <= tau0/10); internal
    callers that deliberately undersample pass ``_check_dt=False``.
    """
    if not T > 0:
        raise NoiseError("T must be > 0")
    if not dt > 0:
        raise NoiseError("dt must be > 0")
    if _check_dt and dt > spec.tau0 / 10.0:
        raise NoiseError(
            f"dt={dt:g} too coarse for tau0={spec.tau0:g}; need dt <= tau0/10"
        )
    steps = int(round(T / dt))
    if steps < 1:
        raise NoiseError("T must cover at least one step")

    times = np.arange(steps + 1) * dt
    values = np.zeros((grid.n, steps + 1))
    r = float(np.exp(-dt / spec.tau0))
    for node, amp in zip(spec.nodes, spec.amplitudes):
        if node not in grid.bus_index:
            raise NoiseError(f"disturbed node {node} is not a bus of the grid")
        gen = np.random.Generator(np.random.Philox(key=stream_key(spec.seed, member, node)))
        row = grid.bus_index[node]
        values[row] = amp * _unit_ou(gen, r, steps)
    return NoisePath(times=times, values=values, bus_ids=tuple(b.id for b in grid.buses))


def estimate_autocorrelation(path: NoisePath, node: int, max_lag: float) -> np.ndarray:
    """Time-average correlator C(l) = <x(t) x(t+l)> on the discrete grid.

    Returns an array of (lag, correlation) rows for lags 0, dt, 2 dt, ...
    up to max_lag. Requires the path to span at least 10 * max_lag.
    """
    if node not in path.bus_ids:
        raise NoiseError(f"node {node} not present in the path")
    dt = path.dt
    span = path.times[-1] - path.times[0]
    if span < 10.0 * max_lag:
        raise NoiseError(
            f"path length {span:g} too short for max_lag {max_lag:g}; need >= 10x"
        )
    x = path.values[path.bus_ids.index(node)]
    n_lags = int(np.floor(max_lag / dt)) + 1
    out = np.empty((n_lags, 2))
    K = x.shape[0]
    for l in range(n_lags):
        out[l, 0] = l * dt
        out[l, 1] = float(x[: K - l] @ x[l:]) / (K - l)
    return out


def default_amplitudes(
    grid: GridNetwork,
    nodes: Sequence[int],
    fraction: float = 0.01,
    floor: Optional[float] = None,
) -> tuple[float, ...]:
    """Per-node amplitudes: fraction of |P_i|, floored for zero-power buses.

    The default floor is the fraction applied to the mean nonzero |P|,
    keeping disturbances in the linear-response regime everywhere.
    """
    p_abs = np.abs(grid.power)
    nonzero = p_abs[p_abs > 0]
    if floor is None:
        floor = fraction * float(nonzero.mean()) if nonzero.size else fraction
    out = []
    for node in nodes:
        p = p_abs[grid.bus_index[node]]
        out.append(fraction * float(p) if p > 0 else float(floor))
    return tuple(out)
