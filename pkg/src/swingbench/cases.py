"""Bundled grid cases and synthetic grid builders.

Bundled files live under ``swingbench/data`` and are self-describing:
their ``metadata`` block records how the dispatch and susceptances were
constructed. ``synthetic_grid`` builds arbitrarily large connected test
grids in memory for scaling studies.
"""

from __future__ import annotations

import math
from importlib import resources

import numpy as np

from .grid import Bus, GridNetwork, Line, parse_grid

#: names of the grid files shipped with the package
BUNDLED = ("twobus", "path3", "test10", "ieee118", "ieee118_sub30")


def case_text(name: str) -> str:
    """Raw JSON text of a bundled case."""
    if name not in BUNDLED:
        raise KeyError(f"unknown bundled case {name!r}; available: {BUNDLED}")
    return resources.files("swingbench.data").joinpath(f"{name}.json").read_text("utf-8")


def load_case(name: str) -> GridNetwork:
    """Parse and validate a bundled case."""
    return parse_grid(case_text(name))


def synthetic_grid(n: int, seed: int = 1, base_power: float = 50.0) -> GridNetwork:
    """Connected rectangular-lattice grid with chords and balanced dispatch.

    Buses alternate generator/load on a near-square lattice; a sprinkle
    of random chords keeps the graph meshed like a transmission network.
    Susceptances are sized a few times the typical injection so operating
    angles stay well inside the stability region. Intended for scaling
    and performance tests, not for physical realism.
    """
    if n < 2:
        raise ValueError("need at least 2 buses")
    rng = np.random.default_rng(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
    cols = int(math.ceil(math.sqrt(n)))

    def node(r, c):
        return r * cols + c + 1

    edges = set()
    for k in range(n):
        r, c = divmod(k, cols)
        if c + 1 < cols and node(r, c + 1) <= n:
            edges.add((node(r, c), node(r, c + 1)))
        if node(r + 1, c) <= n:
            edges.add((node(r, c), node(r + 1, c)))
    # random chords, ~5% of n
    for _ in range(max(1, n // 20)):
        a, b = int(rng.integers(1, n + 1)), int(rng.integers(1, n + 1))
        if a != b:
            edges.add((min(a, b), max(a, b)))

    half = n // 2
    gen_power = base_power * half / (n - half)
    buses = []
    for k in range(1, n + 1):
        if k % 2 == 0:
            buses.append(Bus(id=k, kind="load", power=-base_power))
        else:
            buses.append(Bus(id=k, kind="generator", power=gen_power, inertia_constant=5.0))
    # exact balance on the last generator
    total = math.fsum(b.power for b in buses)
    for idx in range(n - 1, -1, -1):
        if buses[idx].kind == "generator":
            buses[idx] = Bus(
                id=buses[idx].id,
                kind="generator",
                power=buses[idx].power - total,
                inertia_constant=5.0,
            )
            break

    b_typ = 6.0 * base_power
    lines = [
        Line(from_bus=a, to_bus=bb, susceptance=b_typ * float(1.0 + 0.5 * rng.random()))
        for a, bb in sorted(edges)
    ]
    return GridNetwork(
        buses=tuple(buses),
        lines=tuple(lines),
        base_frequency_hz=50.0,
        unit_system="MW",
        metadata={"description": f"synthetic {n}-bus lattice grid, seed {seed}"},
    )
