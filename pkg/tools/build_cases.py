#!/usr/bin/env python3
"""Regenerate the bundled grid files under src/swingbench/data/.

Provenance of the shipped cases:

* ``twobus``/``path3``: hand-sized per-unit examples with closed-form
  operating states, used heavily by the test suite.
* ``test10``: a 10-bus ring-with-chords grid for route-equivalence runs.
* ``ieee118``: the standard IEEE 118-bus topology (118 buses, 186
  branches, 7 parallel pairs merged to 179 lines; 54 generator buses)
  with a synthetic, fully documented dispatch and susceptance rule:

  - loads draw 40 + 5*(id mod 8) MW, with a deterministic boost on
    transit-heavy buses so no node relaxes faster than RATE_TARGET;
  - generator injections follow fixed weights, rescaled for exact
    balance;
  - line susceptances are flow-proportional, b_l = (|f_l| + 0.25 <|f|>)
    / sin(DELTA_TARGET), where f is the DC flow of the dispatch. This
    equalizes line loadings around DELTA_TARGET radians and compresses
    the spread of network mode rates so that fixed-step integration of
    the full nonlinear system is affordable at desk scale. The original
    per-unit reactances only shape the first flow pattern (through the
    uniform-susceptance DC solve); the shipped susceptances are the
    documented rule's output, not 1/x conversions.

  All generators carry an inertia constant of 5 s.
* ``ieee118_sub30``: the induced subgraph on buses 1..30 of the same
  topology, dispatched and sized by the identical rules (documented
  fallback case for heterogeneous long-horizon runs).

Run from the repository root after installing the package:

    python tools/build_cases.py
"""

import json
import math
import sys
from pathlib import Path

import numpy as np

from swingbench.equilibrium import solve_steady_state
from swingbench.grid import Bus, GridNetwork, Line, assign_parameters, serialize_grid
from swingbench.spectral import analyze

DATA = Path(__file__).resolve().parents[1] / "src" / "swingbench" / "data"

DELTA_TARGET = 0.55  # radians of angle difference on a typically loaded line
RATE_TARGET = 500.0  # cap for per-node relaxation rates (1/s) at alpha = 1.5
FLOW_FLOOR = 0.15  # susceptance floor for lightly loaded lines, vs mean |flow|

# IEEE 118-bus branch list (from, to, reactance in per unit). Parallel
# circuits appear twice and are merged by summing susceptances.
BRANCHES_118 = [
    (1, 2, 0.0999), (1, 3, 0.0424), (4, 5, 0.00798), (3, 5, 0.108),
    (5, 6, 0.054), (6, 7, 0.0208), (8, 9, 0.0305), (8, 5, 0.0267),
    (9, 10, 0.0322), (4, 11, 0.0688), (5, 11, 0.0682), (11, 12, 0.0196),
    (2, 12, 0.0616), (3, 12, 0.16), (7, 12, 0.034), (11, 13, 0.0731),
    (12, 14, 0.0707), (13, 15, 0.2444), (14, 15, 0.195), (12, 16, 0.0834),
    (15, 17, 0.0437), (16, 17, 0.1801), (17, 18, 0.0505), (18, 19, 0.0493),
    (19, 20, 0.117), (15, 19, 0.0394), (20, 21, 0.0849), (21, 22, 0.097),
    (22, 23, 0.159), (23, 24, 0.0492), (23, 25, 0.08), (26, 25, 0.0382),
    (25, 27, 0.163), (27, 28, 0.0855), (28, 29, 0.0943), (30, 17, 0.0388),
    (8, 30, 0.0504), (26, 30, 0.086), (17, 31, 0.1563), (29, 31, 0.0331),
    (23, 32, 0.1153), (31, 32, 0.0985), (27, 32, 0.0755), (15, 33, 0.1244),
    (19, 34, 0.247), (35, 36, 0.0102), (35, 37, 0.0497), (33, 37, 0.142),
    (34, 36, 0.0268), (34, 37, 0.0094), (38, 37, 0.0375), (37, 39, 0.106),
    (37, 40, 0.168), (30, 38, 0.054), (39, 40, 0.0605), (40, 41, 0.0487),
    (40, 42, 0.183), (41, 42, 0.135), (43, 44, 0.2454), (34, 43, 0.1681),
    (44, 45, 0.0901), (45, 46, 0.1356), (46, 47, 0.127), (46, 48, 0.189),
    (47, 49, 0.0625), (42, 49, 0.323), (42, 49, 0.323), (45, 49, 0.186),
    (48, 49, 0.0505), (49, 50, 0.0752), (49, 51, 0.137), (51, 52, 0.0588),
    (52, 53, 0.1635), (53, 54, 0.122), (49, 54, 0.289), (49, 54, 0.291),
    (54, 55, 0.0707), (54, 56, 0.00955), (55, 56, 0.0151), (56, 57, 0.0966),
    (50, 57, 0.134), (56, 58, 0.0966), (51, 58, 0.0719), (54, 59, 0.2293),
    (56, 59, 0.251), (56, 59, 0.239), (55, 59, 0.2158), (59, 60, 0.145),
    (59, 61, 0.15), (60, 61, 0.0135), (60, 62, 0.0561), (61, 62, 0.0376),
    (63, 59, 0.0386), (63, 64, 0.02), (64, 61, 0.0268), (38, 65, 0.0986),
    (64, 65, 0.0302), (49, 66, 0.0919), (49, 66, 0.0919), (62, 66, 0.218),
    (62, 67, 0.117), (65, 66, 0.037), (66, 67, 0.1015), (65, 68, 0.016),
    (47, 69, 0.2778), (49, 69, 0.324), (68, 69, 0.037), (69, 70, 0.127),
    (24, 70, 0.4115), (70, 71, 0.0355), (24, 72, 0.196), (71, 72, 0.18),
    (71, 73, 0.0454), (70, 74, 0.1323), (70, 75, 0.141), (69, 75, 0.122),
    (74, 75, 0.0406), (76, 77, 0.148), (69, 77, 0.101), (75, 77, 0.1999),
    (77, 78, 0.0124), (78, 79, 0.0244), (77, 80, 0.0485), (77, 80, 0.105),
    (79, 80, 0.0704), (68, 81, 0.0202), (81, 80, 0.037), (77, 82, 0.0853),
    (82, 83, 0.03665), (83, 84, 0.132), (83, 85, 0.148), (84, 85, 0.0641),
    (85, 86, 0.123), (86, 87, 0.2074), (85, 88, 0.102), (85, 89, 0.173),
    (88, 89, 0.0712), (89, 90, 0.188), (89, 90, 0.0997), (90, 91, 0.0836),
    (89, 92, 0.0505), (89, 92, 0.1581), (91, 92, 0.1272), (92, 93, 0.0848),
    (92, 94, 0.158), (93, 94, 0.0732), (94, 95, 0.0434), (80, 96, 0.182),
    (82, 96, 0.053), (94, 96, 0.0869), (80, 97, 0.0934), (80, 98, 0.108),
    (80, 99, 0.206), (92, 100, 0.295), (94, 100, 0.058), (95, 96, 0.0547),
    (96, 97, 0.0885), (98, 100, 0.179), (99, 100, 0.0813), (100, 101, 0.1262),
    (92, 102, 0.0559), (101, 102, 0.112), (100, 103, 0.0525), (100, 104, 0.204),
    (103, 104, 0.1584), (103, 105, 0.1625), (100, 106, 0.229), (104, 105, 0.0378),
    (105, 106, 0.0547), (105, 107, 0.183), (105, 108, 0.0703), (106, 107, 0.183),
    (108, 109, 0.0288), (103, 110, 0.1813), (109, 110, 0.0762), (110, 111, 0.0755),
    (110, 112, 0.064), (17, 113, 0.0301), (32, 113, 0.203), (32, 114, 0.0612),
    (27, 115, 0.0741), (114, 115, 0.0104), (68, 116, 0.00405), (12, 117, 0.14),
    (75, 118, 0.0481), (76, 118, 0.0544),
]

GEN_BUSES_118 = {
    1, 4, 6, 8, 10, 12, 15, 18, 19, 24, 25, 26, 27, 31, 32, 34, 36, 40, 42,
    46, 49, 54, 55, 56, 59, 61, 62, 65, 66, 69, 70, 72, 73, 74, 76, 77, 80,
    85, 87, 89, 90, 91, 92, 99, 100, 103, 104, 105, 107, 110, 111, 112, 113,
    116,
}

OMEGA0 = 2 * math.pi * 50.0
ALPHA = 1.5
H_GEN = 5.0


def merge_parallel(branches):
    merged = {}
    for f, t, x in branches:
        key = (min(f, t), max(f, t))
        merged[key] = merged.get(key, 0.0) + 1.0 / x
    return merged  # unordered pair -> susceptance (per unit)


def dc_flows(bus_ids, pairs, b, powers):
    """DC flow per line for susceptances b and injections powers."""
    idx = {bid: k for k, bid in enumerate(bus_ids)}
    n = len(bus_ids)
    L = np.zeros((n, n))
    for (f, t), bl in zip(pairs, b):
        i, j = idx[f], idx[t]
        L[i, i] += bl
        L[j, j] += bl
        L[i, j] -= bl
        L[j, i] -= bl
    theta = np.linalg.pinv(L) @ powers
    return np.array([b[k] * (theta[idx[f]] - theta[idx[t]]) for k, (f, t) in enumerate(pairs)])


def build_case(bus_ids, pairs, gen_buses, name, description):
    """Dispatch + susceptance synthesis, validation, and serialization."""
    bus_ids = sorted(bus_ids)
    n = len(bus_ids)
    idx = {bid: k for k, bid in enumerate(bus_ids)}
    gen = np.array([bid in gen_buses for bid in bus_ids])

    pair_list = sorted(pairs)
    adj = {bid: [] for bid in bus_ids}
    for f, t in pair_list:
        adj[f].append(t)
        adj[t].append(f)

    # local-balance dispatch: every load is served by its nearest generator
    # (graph distance, ties to the smaller id), which keeps line flows - and
    # with them the flow-proportional susceptances - small relative to the
    # injections. Short flow paths are what keep the network mode rates low.
    base_mag = np.array([40.0 + 5.0 * (bid % 8) for bid in bus_ids])
    from collections import deque

    owner = {}
    queue = deque()
    for bid in sorted(gen_buses & set(bus_ids)):
        owner[bid] = bid
        queue.append(bid)
    while queue:
        u = queue.popleft()
        for v in sorted(adj[u]):
            if v not in owner:
                owner[v] = owner[u]
                queue.append(v)

    powers = np.where(gen, 0.0, -base_mag)
    for bid in bus_ids:
        k = idx[bid]
        if not gen[k]:
            powers[idx[owner[bid]]] += base_mag[k]
    # generators with no assigned load still inject their base power,
    # compensated by scaling all loads up pro rata
    for bid in sorted(gen_buses & set(bus_ids)):
        k = idx[bid]
        if powers[k] == 0.0:
            powers[k] = base_mag[k]
    loads = ~gen
    powers[loads] *= powers[gen].sum() / (-powers[loads].sum())

    def rule_b(f):
        return (np.abs(f) + FLOW_FLOOR * np.abs(f).mean()) / math.sin(DELTA_TARGET)

    def through_of(b):
        through = np.zeros(n)
        for k, (ff, tt) in enumerate(pair_list):
            through[idx[ff]] += b[k]
            through[idx[tt]] += b[k]
        return through

    # flow/susceptance consistency passes with the dispatch frozen
    b = np.ones(len(pair_list))
    for _ in range(4):
        b = rule_b(dc_flows(bus_ids, pair_list, b, powers))

    # targeted boost: transit-heavy buses (large incident susceptance, small
    # own injection) relax too fast for affordable fixed-step integration;
    # raise their |P| to cap k_i/d_i near RATE_TARGET, rebalancing through
    # the loads so the overall scale stays put
    for _ in range(6):
        p_min = through_of(b) * OMEGA0 / (ALPHA * RATE_TARGET)
        mag = np.maximum(np.abs(powers), p_min)
        powers = np.where(gen, mag, -mag)
        powers[loads] *= powers[gen].sum() / (-powers[loads].sum())
        b = rule_b(dc_flows(bus_ids, pair_list, b, powers))

    # exact balance: absorb float residual on the largest generator
    residual = math.fsum(powers)
    k_big = int(np.argmax(np.where(gen, powers, -np.inf)))
    powers[k_big] -= residual

    buses = tuple(
        Bus(
            id=bid,
            kind="generator" if gen[idx[bid]] else "load",
            power=float(powers[idx[bid]]),
            inertia_constant=H_GEN if gen[idx[bid]] else None,
        )
        for bid in bus_ids
    )
    lines = tuple(
        Line(from_bus=f, to_bus=t, susceptance=float(b[k]))
        for k, (f, t) in enumerate(pair_list)
    )
    grid = GridNetwork(
        buses=buses,
        lines=lines,
        base_frequency_hz=50.0,
        unit_system="MW",
        metadata={
            "description": description,
            "dispatch": "synthetic local balance: loads 40 + 5*(id mod 8) MW served by "
            "their nearest generator (graph distance); see tools/build_cases.py",
            "susceptance_rule": f"flow-proportional, (|f| + {FLOW_FLOOR}<|f|>)/sin({DELTA_TARGET}); "
            "per-unit reactances shape only the initial flow pattern",
            "inertia_constants": f"{H_GEN} s on all generator buses",
        },
    )

    # validation
    point = solve_steady_state(grid)
    assert point.stable, f"{name}: operating point unstable"
    i, j, _ = grid.edges
    spread = np.max(np.abs(point.angles[i] - point.angles[j]))
    params = assign_parameters(grid, "homogeneous_ratio", alpha=ALPHA, gamma=0.4)
    spec = analyze(grid, point, params)
    lam = spec.eigenvalues
    print(
        f"{name}: n={grid.n} lines={len(grid.lines)} residual={point.residual_norm:.2e} "
        f"|dtheta|max={spread:.3f} lam2={lam[1]:.3g} lam_max={lam[-1]:.4g} "
        f"rate*dt@1.25={1.25 / lam[-1]:.2e}"
    )
    assert spread < 0.8, f"{name}: operating angles too large"
    return grid


def build_twobus():
    return GridNetwork(
        buses=(
            Bus(id=1, kind="generator", power=1.0, inertia_constant=5.0),
            Bus(id=2, kind="load", power=-1.0),
        ),
        lines=(Line(from_bus=1, to_bus=2, susceptance=2.0),),
        base_frequency_hz=50.0,
        unit_system="per_unit",
        metadata={"description": "two-bus example with angle difference arcsin(1/2)"},
    )


def build_path3():
    return GridNetwork(
        buses=(
            Bus(id=1, kind="generator", power=0.3, inertia_constant=5.0),
            Bus(id=2, kind="generator", power=0.2, inertia_constant=5.0),
            Bus(id=3, kind="load", power=-0.5),
        ),
        lines=(
            Line(from_bus=1, to_bus=2, susceptance=1.0),
            Line(from_bus=2, to_bus=3, susceptance=1.0),
        ),
        base_frequency_hz=50.0,
        unit_system="per_unit",
        metadata={"description": "three-bus path with closed-form line flows"},
    )


def build_test10():
    n = 10
    buses = []
    for k in range(1, n + 1):
        if k % 2 == 1:
            buses.append(Bus(id=k, kind="generator", power=60.0, inertia_constant=5.0))
        else:
            buses.append(Bus(id=k, kind="load", power=-60.0))
    ring = [(k, k % n + 1) for k in range(1, n + 1)]
    chords = [(1, 5), (3, 8)]
    lines = [
        Line(from_bus=f, to_bus=t, susceptance=450.0 + 40.0 * ((f + t) % 4))
        for f, t in ring + chords
    ]
    return GridNetwork(
        buses=tuple(buses),
        lines=tuple(lines),
        base_frequency_hz=50.0,
        unit_system="MW",
        metadata={"description": "10-bus ring with two chords for route-equivalence runs"},
    )


def main():
    DATA.mkdir(parents=True, exist_ok=True)

    merged = merge_parallel(BRANCHES_118)
    bus_ids = sorted({b for pair in merged for b in pair})
    assert len(bus_ids) == 118, f"expected 118 buses, got {len(bus_ids)}"
    assert len(BRANCHES_118) == 186, f"expected 186 raw branches, got {len(BRANCHES_118)}"
    assert len(merged) == 179, f"expected 179 merged lines, got {len(merged)}"
    assert len(GEN_BUSES_118) == 54

    grids = {
        "twobus": build_twobus(),
        "path3": build_path3(),
        "test10": build_test10(),
        "ieee118": build_case(
            bus_ids,
            merged.keys(),
            GEN_BUSES_118,
            "ieee118",
            "IEEE 118-bus topology (186 branches merged to 179 lines) with a "
            "synthetic documented dispatch and flow-proportional susceptances",
        ),
        "ieee118_sub30": build_case(
            [b for b in bus_ids if b <= 30],
            {p for p in merged if p[0] <= 30 and p[1] <= 30},
            {g for g in GEN_BUSES_118 if g <= 30},
            "ieee118_sub30",
            "induced subgraph on buses 1..30 of the IEEE 118-bus topology, "
            "dispatched and sized by the same documented rules",
        ),
    }
    for name, grid in grids.items():
        path = DATA / f"{name}.json"
        path.write_text(serialize_grid(grid), encoding="utf-8")
        print(f"wrote {path}")


if __name__ == "__main__":
    sys.exit(main())
