"""Command-line front end: validate / steadystate / spectrum / noise /
simulate / compare / rank.

Every output file is CSV (comma-separated, UTF-8, '.' decimals) with a
'#'-prefixed comment header echoing the package version and the fully
resolved run configuration, so a file regenerates from its own header.
Runs are bit-reproducible: identical configuration and seed produce
identical bytes (no timestamps are written).

Exit codes: 0 success, 1 module error (single machine-parsable line on
stderr), 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .dynamics import (
    SimulationConfig,
    metric_dt,
    simulate_linear,
    simulate_modal,
    simulate_nonlinear,
    suggested_dt,
)
from .errors import SwingbenchError
from .grid import assign_parameters, load_grid
from .equilibrium import solve_steady_state
from .metrics import analytic_general, analytic_long, analytic_short, default_warmup, ensemble_run, rank_nodes
from .noise import NoiseSpec, default_amplitudes, generate_noise
from .spectral import analyze, time_scales


def _parse_int_list(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _parse_float_list(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _add_param_options(p):
    p.add_argument("--scheme", choices=["homogeneous", "realistic"], default="homogeneous",
                   help="parameter assignment scheme (default: homogeneous)")
    p.add_argument("--alpha", type=float, default=1.5, help="damping prefactor (default 1.5)")
    p.add_argument("--gamma", type=float, default=0.4,
                   help="damping-to-inertia ratio for the homogeneous scheme (default 0.4 1/s)")


def _params_from_args(grid, args):
    scheme = "homogeneous_ratio" if args.scheme == "homogeneous" else "realistic"
    gamma = args.gamma if scheme == "homogeneous_ratio" else None
    return assign_parameters(grid, scheme, alpha=args.alpha, gamma=gamma)


def _threads(args):
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get("SWINGBENCH_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


class _Output:
    """CSV sink with a deterministic comment header."""

    def __init__(self, path, args, extra=None):
        self.path = path
        self.lines = [f"# swingbench {__version__}"]
        skip = {"func", "out"}
        cfg = {k: v for k, v in sorted(vars(args).items()) if k not in skip and v is not None}
        self.lines.append("# config: " + " ".join(f"{k}={v}" for k, v in cfg.items()))
        for line in extra or []:
            self.lines.append(f"# {line}")
        self.rows = []
        self.header = None

    def set_header(self, cols):
        self.header = list(cols)

    def add(self, row):
        self.rows.append(row)

    def write(self):
        buf = io.StringIO()
        for line in self.lines:
            buf.write(line + "\n")
        w = csv.writer(buf, lineterminator="\n")
        if self.header:
            w.writerow(self.header)
        w.writerows(self.rows)
        text = buf.getvalue()
        if self.path:
            with open(self.path, "w", encoding="utf-8", newline="") as f:
                f.write(text)
        else:
            sys.stdout.write(text)


def _fmt(x):
    if x is None:
        return "diverges"
    if isinstance(x, float):
        return repr(x)
    return x


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_validate(args):
    grid = load_grid(args.grid)
    kinds = [b.kind for b in grid.buses]
    total_gen = sum(b.power for b in grid.buses if b.power > 0)
    print(f"{args.grid}: OK")
    print(f"  buses: {grid.n} ({kinds.count('generator')} generator, {kinds.count('load')} load)")
    print(f"  lines: {len(grid.lines)}")
    print(f"  base frequency: {grid.base_frequency_hz} Hz, units: {grid.unit_system}")
    print(f"  dispatched power: {total_gen:g} (balanced within tolerance)")
    return 0


def cmd_steadystate(args):
    grid = load_grid(args.grid)
    point = solve_steady_state(grid)
    out = _Output(args.out, args, extra=[
        f"residual_norm = {point.residual_norm!r}",
        f"stable = {point.stable}",
        f"iterations = {point.iterations}",
    ])
    out.set_header(["bus", "angle", "residual"])
    from .equilibrium import power_mismatch

    mism = power_mismatch(grid, point.angles)
    for k, bus in enumerate(grid.buses):
        out.add([bus.id, _fmt(float(point.angles[k])), _fmt(float(mism[k]))])
    out.write()
    return 0


def cmd_spectrum(args):
    grid = load_grid(args.grid)
    point = solve_steady_state(grid)
    params = _params_from_args(grid, args)
    sd = analyze(grid, point, params)
    scales = time_scales(sd, params, args.tau0)
    out = _Output(args.out, args, extra=[
        f"relaxation_time = {scales.relaxation_time!r}",
        f"regime(tau0={args.tau0!r}) = {scales.regime}",
    ])
    cols = ["mode", "eigenvalue", "mode_time"]
    k = min(args.modes, grid.n) if args.modes else 0
    cols += [f"u{m}" for m in range(1, k + 1)]
    out.set_header(cols)
    for alpha in range(grid.n):
        lam = float(sd.eigenvalues[alpha])
        mode_time = math.inf if lam == 0 else 1.0 / lam
        row = [alpha + 1, _fmt(lam), _fmt(mode_time)]
        row += [_fmt(float(sd.eigenvectors[alpha, m])) for m in range(k)]
        out.add(row)
    out.write()
    return 0


def cmd_noise(args):
    grid = load_grid(args.grid)
    nodes = _parse_int_list(args.nodes)
    if args.amp:
        amps = _parse_float_list(args.amp)
        if len(amps) == 1:
            amps = amps * len(nodes)
    else:
        amps = list(default_amplitudes(grid, nodes))
    spec = NoiseSpec(nodes=tuple(nodes), amplitudes=tuple(amps), tau0=args.tau0, seed=args.seed)
    path = generate_noise(spec, args.T, args.dt, grid)
    out = _Output(args.out, args)
    out.set_header(["time"] + [f"node_{n}" for n in nodes])
    rows = [grid.bus_index[n] for n in nodes]
    for k, t in enumerate(path.times):
        out.add([_fmt(float(t))] + [_fmt(float(path.values[r, k])) for r in rows])
    out.write()
    return 0


def cmd_simulate(args):
    grid = load_grid(args.grid)
    point = solve_steady_state(grid)
    params = _params_from_args(grid, args)
    nodes = _parse_int_list(args.nodes) if args.nodes else [b.id for b in grid.buses]
    amps = default_amplitudes(grid, nodes, fraction=args.amp_fraction)
    spec = NoiseSpec(nodes=tuple(nodes), amplitudes=amps, tau0=args.tau0, seed=args.seed)

    dt = args.dt if args.dt else suggested_dt(grid, params, point)
    steps = max(1, round(args.T / dt))
    dt = args.T / steps
    noise = generate_noise(spec, args.T, dt, grid, _check_dt=dt <= spec.tau0 / 10.0)
    config = SimulationConfig(T=args.T, dt=dt, record_stride=args.record_stride, model=args.model)

    out = _Output(args.out, args, extra=[f"dt = {dt!r}"])
    out.set_header(["time", "bus", "angle", "frequency"])
    if args.model == "modal":
        sd = analyze(grid, point, params)
        modal = simulate_modal(sd, params, noise, config)
        sqrt_d = np.sqrt(params.damping)
        angles = (sd.eigenvectors[:, 1:] @ modal.coefficients) / sqrt_d[:, None]
        freqs = (sd.eigenvectors[:, 1:] @ modal.derivatives) / sqrt_d[:, None]
        times = modal.times
    else:
        sim = simulate_nonlinear if args.model == "nonlinear" else simulate_linear
        traj = sim(grid, params, point, noise, config)
        angles, freqs, times = traj.angles, traj.frequencies, traj.times
    for k, t in enumerate(times):
        for b_idx, bus in enumerate(grid.buses):
            out.add([_fmt(float(t)), bus.id, _fmt(float(angles[b_idx, k])), _fmt(float(freqs[b_idx, k]))])
    out.write()
    return 0


def cmd_compare(args):
    grid = load_grid(args.grid)
    point = solve_steady_state(grid)
    params = _params_from_args(grid, args)
    sd = analyze(grid, point, params)

    if args.buses == "all":
        buses = [b.id for b in grid.buses]
    elif args.buses.startswith("sample:"):
        k = int(args.buses.split(":", 1)[1])
        ids = [b.id for b in grid.buses]
        step = max(1, len(ids) // k)
        buses = ids[::step][:k]
    else:
        buses = _parse_int_list(args.buses)

    tau0_list = _parse_float_list(args.tau0_list)
    model = args.model
    if model == "auto":
        model = "modal" if params.gamma is not None else "linear"

    if args.members < 2 or args.T_factor < 20:
        print(
            "warning: few members or a short window give a noisy finite-horizon "
            "estimate of the stationary metric",
            file=sys.stderr,
        )

    dt = args.dt if args.dt else metric_dt(grid, params, point, tau0=min(tau0_list))
    warmup = args.warmup if args.warmup is not None else default_warmup(sd, params)

    def one(tau0, bus):
        amps = default_amplitudes(grid, [bus], fraction=args.amp_fraction)
        spec = NoiseSpec(nodes=(bus,), amplitudes=amps, tau0=tau0, seed=args.seed)
        T = args.T_factor * tau0
        steps = max(2, round(T / dt))
        config = SimulationConfig(T=steps * dt, dt=dt, model=model)
        stats = ensemble_run(
            grid, params, point, spec, args.members, config,
            warmup=warmup, spectral=sd,
        )
        scales = time_scales(sd, params, tau0)
        g8 = analytic_general(sd, params, spec, grid) if params.gamma is not None else None
        g9 = analytic_short(params, spec, grid)
        g10 = analytic_long(sd, params, spec, grid)
        return [tau0, bus, stats.mean, stats.std, g8, g9, g10, scales.regime]

    jobs = [(t, b) for t in tau0_list for b in buses]
    with ThreadPoolExecutor(max_workers=_threads(args)) as pool:
        rows = list(pool.map(lambda tb: one(*tb), jobs))

    out = _Output(args.out, args, extra=[f"dt = {dt!r}", f"warmup = {warmup!r}", f"model = {model}"])
    out.set_header(["tau0", "bus", "numeric_mean", "numeric_std",
                    "analytic_general", "analytic_short", "analytic_long", "regime"])
    for row in rows:
        out.add([_fmt(v) for v in row])
    out.write()
    return 0


def cmd_rank(args):
    grid = load_grid(args.grid)
    point = solve_steady_state(grid)
    params = _params_from_args(grid, args)
    sd = analyze(grid, point, params)
    ranking = rank_nodes(grid, params, sd, args.tau0)
    out = _Output(args.out, args)
    out.set_header(["rank", "bus", "long_tau0_effort"])
    for k, (bus, val) in enumerate(ranking, start=1):
        out.add([k, bus, _fmt(val)])
    out.write()
    return 0


# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(
        prog="swingbench",
        description="Power-grid swing dynamics under correlated power fluctuations",
    )
    p.add_argument("--version", action="version", version=f"swingbench {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a grid file against all model invariants")
    v.add_argument("grid")
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("steadystate", help="solve the synchronous operating state")
    s.add_argument("grid")
    s.add_argument("--out", default=None, help="output CSV (default: stdout)")
    s.set_defaults(func=cmd_steadystate)

    sp = sub.add_parser("spectrum", help="damping-normalized Laplacian spectrum and time scales")
    sp.add_argument("grid")
    _add_param_options(sp)
    sp.add_argument("--tau0", type=float, default=1.0, help="correlation time for the regime label")
    sp.add_argument("--modes", type=int, default=0, help="also emit eigenvector columns for the k lowest modes")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_spectrum)

    no = sub.add_parser("noise", help="sample a disturbance realization")
    no.add_argument("grid")
    no.add_argument("--tau0", type=float, required=True)
    no.add_argument("--nodes", required=True, help="comma-separated bus ids")
    no.add_argument("--amp", default=None, help="amplitude (single value or per-node list)")
    no.add_argument("--seed", type=int, default=0)
    no.add_argument("--T", type=float, required=True)
    no.add_argument("--dt", type=float, required=True)
    no.add_argument("--out", default=None)
    no.set_defaults(func=cmd_noise)

    si = sub.add_parser("simulate", help="integrate one noisy transient and record it")
    si.add_argument("grid")
    _add_param_options(si)
    si.add_argument("--model", choices=["nonlinear", "linear", "modal"], default="nonlinear")
    si.add_argument("--tau0", type=float, required=True)
    si.add_argument("--T", type=float, required=True)
    si.add_argument("--dt", type=float, default=None, help="integrator step (default: suggested)")
    si.add_argument("--seed", type=int, default=0)
    si.add_argument("--nodes", default=None, help="disturbed bus ids (default: all)")
    si.add_argument("--amp-fraction", type=float, default=0.01, dest="amp_fraction")
    si.add_argument("--record-stride", type=int, default=1, dest="record_stride")
    si.add_argument("--out", default=None)
    si.set_defaults(func=cmd_simulate)

    co = sub.add_parser("compare", help="ensemble metric vs closed-form predictions")
    co.add_argument("grid")
    co.add_argument("--threads", type=int, default=None,
                    help="worker threads (default: env SWINGBENCH_THREADS or CPU count)")
    _add_param_options(co)
    co.add_argument("--tau0-list", required=True, dest="tau0_list", help="comma-separated correlation times")
    co.add_argument("--members", type=int, default=10)
    co.add_argument("--seed", type=int, default=0)
    co.add_argument("--buses", default="all", help='"all", "sample:K", or comma-separated ids')
    co.add_argument("--model", choices=["auto", "nonlinear", "linear", "modal"], default="auto")
    co.add_argument("--T-factor", type=float, default=100.0, dest="T_factor",
                    help="measurement window in units of tau0 (default 100)")
    co.add_argument("--dt", type=float, default=None)
    co.add_argument("--warmup", type=float, default=None, help="transient discard (default: auto)")
    co.add_argument("--amp-fraction", type=float, default=0.01, dest="amp_fraction")
    co.add_argument("--out", default=None)
    co.set_defaults(func=cmd_compare)

    ra = sub.add_parser("rank", help="rank buses by long-correlation-time control effort")
    ra.add_argument("grid")
    _add_param_options(ra)
    ra.add_argument("--tau0", type=float, required=True)
    ra.add_argument("--out", default=None)
    ra.set_defaults(func=cmd_rank)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SwingbenchError as e:
        print(f"swingbench: error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"swingbench: error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
