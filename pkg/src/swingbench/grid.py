"""Static grid data model, file format, and dynamical-parameter assignment.

The native grid file is a JSON document::

    {
      "version": 1,
      "base_frequency_hz": 50.0,
      "unit_system": "MW",            # or "per_unit"
      "metadata": {...},              # optional free-form notes
      "buses": [{"id": 1, "kind": "generator", "power": 100.0,
                 "inertia_constant": 5.0, "damping_override": null}, ...],
      "lines": [{"from": 1, "to": 2, "susceptance": 850.0}, ...]
    }

Powers are signed injections (generation positive, consumption negative)
in the declared unit system; susceptances share the power unit so that
``b * sin(angle)`` is a power. All internal computation is unit-agnostic
and simply consistent with the file's declaration.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from .errors import (
    DisconnectedGridError,
    GridFormatError,
    GridValidationError,
    ParameterError,
    PowerImbalanceError,
)

FORMAT_VERSION = 1
UNIT_SYSTEMS = ("MW", "per_unit")
GENERATOR = "generator"
LOAD = "load"

#: relative tolerance on the power balance, w.r.t. the largest |P_i|
BALANCE_RTOL = 1e-9

#: default damping floor for zero-power buses, in system power units
DEFAULT_D_MIN = 0.01

#: relative tolerance used to decide that d_i/m_i is node-independent
GAMMA_RTOL = 1e-12


@dataclass(frozen=True)
class Bus:
    """One network node: an injection plus optional machine constants."""

    id: int
    kind: str
    power: float
    inertia_constant: Optional[float] = None
    damping_override: Optional[float] = None

    def __post_init__(self):
        if self.kind not in (GENERATOR, LOAD):
            raise GridValidationError(
                f"bus {self.id}: kind must be 'generator' or 'load', got {self.kind!r}"
            )
        if self.inertia_constant is not None:
            if self.kind != GENERATOR:
                raise GridValidationError(
                    f"bus {self.id}: inertia_constant is only valid on generator buses"
                )
            if self.inertia_constant < 0:
                raise GridValidationError(
                    f"bus {self.id}: inertia_constant must be >= 0"
                )
        if self.damping_override is not None and self.damping_override <= 0:
            raise GridValidationError(f"bus {self.id}: damping_override must be > 0")


@dataclass(frozen=True)
class Line:
    """Transmission line between two buses (lossless, susceptance only).

    Parallel circuits must be merged beforehand by summing susceptances;
    the grid validator rejects duplicate unordered pairs.
    """

    from_bus: int
    to_bus: int
    susceptance: float

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise GridValidationError(
                f"line {self.from_bus}-{self.to_bus}: self-loops are not allowed"
            )
        if not self.susceptance > 0:
            raise GridValidationError(
                f"line {self.from_bus}-{self.to_bus}: susceptance must be > 0"
            )


@dataclass(frozen=True)
class GridNetwork:
    """Validated static grid: buses, lines, and the rated frequency.

    Immutable after construction; safe to share across workers. Derived
    arrays (power vector, edge arrays) are cached lazily and exposed
    read-only.
    """

    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    base_frequency_hz: float = 50.0
    unit_system: str = "MW"
    metadata: Optional[dict] = None

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "lines", tuple(self.lines))
        _validate_grid(self)

    @property
    def n(self) -> int:
        return len(self.buses)

    @property
    def base_frequency(self) -> float:
        """Rated angular frequency omega_0 in rad/s."""
        return 2.0 * math.pi * self.base_frequency_hz

    @cached_property
    def bus_index(self) -> dict[int, int]:
        """Map bus id -> position in the bus ordering."""
        return {b.id: k for k, b in enumerate(self.buses)}

    @cached_property
    def power(self) -> np.ndarray:
        """Injection vector aligned with the bus ordering (read-only)."""
        p = np.array([b.power for b in self.buses], dtype=float)
        p.setflags(write=False)
        return p

    @cached_property
    def edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(i, j, b) index/susceptance arrays, one entry per line."""
        i = np.array([self.bus_index[l.from_bus] for l in self.lines], dtype=np.intp)
        j = np.array([self.bus_index[l.to_bus] for l in self.lines], dtype=np.intp)
        b = np.array([l.susceptance for l in self.lines], dtype=float)
        for a in (i, j, b):
            a.setflags(write=False)
        return i, j, b

    def susceptance_matrix(self) -> np.ndarray:
        """Dense symmetric matrix B with B[i, j] = b_ij (zero diagonal)."""
        B = np.zeros((self.n, self.n))
        i, j, b = self.edges
        B[i, j] = b
        B[j, i] = b
        return B


def _validate_grid(grid: GridNetwork) -> None:
    if grid.n == 0:
        raise GridValidationError("grid has no buses")
    if grid.unit_system not in UNIT_SYSTEMS:
        raise GridValidationError(
            f"unit_system must be one of {UNIT_SYSTEMS}, got {grid.unit_system!r}"
        )
    if not grid.base_frequency_hz > 0:
        raise GridValidationError("base_frequency_hz must be > 0")

    seen = set()
    for b in grid.buses:
        if b.id in seen:
            raise GridValidationError(f"duplicate bus id {b.id}")
        seen.add(b.id)

    pairs = set()
    for l in grid.lines:
        for end, name in ((l.from_bus, "from"), (l.to_bus, "to")):
            if end not in seen:
                raise GridValidationError(
                    f"line {l.from_bus}-{l.to_bus}: {name} references unknown bus {end}"
                )
        key = (min(l.from_bus, l.to_bus), max(l.from_bus, l.to_bus))
        if key in pairs:
            raise GridValidationError(
                f"parallel lines between buses {key[0]} and {key[1]}; merge them "
                "by summing susceptance"
            )
        pairs.add(key)

    # lossless balance: injections must cancel
    powers = [b.power for b in grid.buses]
    scale = max((abs(p) for p in powers), default=0.0)
    total = math.fsum(powers)
    if scale > 0 and abs(total) > BALANCE_RTOL * scale:
        raise PowerImbalanceError(
            f"injected powers sum to {total:g} (tolerance {BALANCE_RTOL * scale:g}); "
            "the lossless model requires exact balance"
        )

    # connectivity via BFS over the line graph
    if grid.lines or grid.n == 1:
        adj: dict[int, list[int]] = {b.id: [] for b in grid.buses}
        for l in grid.lines:
            adj[l.from_bus].append(l.to_bus)
            adj[l.to_bus].append(l.from_bus)
        start = grid.buses[0].id
        seen_ids = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen_ids:
                    seen_ids.add(v)
                    stack.append(v)
        if len(seen_ids) != grid.n:
            missing = sorted(set(b.id for b in grid.buses) - seen_ids)
            raise DisconnectedGridError(
                f"grid is not connected; {len(missing)} buses unreachable from bus "
                f"{start} (first few: {missing[:5]})"
            )
    else:
        raise DisconnectedGridError("grid with more than one bus has no lines")


@dataclass(frozen=True)
class DynamicParams:
    """Per-node inertia and damping vectors.

    ``gamma`` is the homogeneous damping-to-inertia ratio d_i/m_i when it
    exists: a finite value when all inertias are positive and the ratio is
    node-independent, ``math.inf`` for the fully inertialess grid (the
    first-order limit), and ``None`` otherwise.
    """

    inertia: np.ndarray
    damping: np.ndarray
    gamma: Optional[float] = None

    def __post_init__(self):
        m = np.asarray(self.inertia, dtype=float)
        d = np.asarray(self.damping, dtype=float)
        if m.shape != d.shape or m.ndim != 1:
            raise ParameterError("inertia and damping must be 1-d vectors of equal length")
        if np.any(m < 0):
            raise ParameterError("inertia must be >= 0 everywhere")
        if np.any(d <= 0):
            raise ParameterError("damping must be > 0 at every node")
        m = m.copy()
        d = d.copy()
        m.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "inertia", m)
        object.__setattr__(self, "damping", d)

    @property
    def n(self) -> int:
        return self.inertia.shape[0]

    @property
    def inv_gamma(self) -> Optional[float]:
        """m/d ratio (seconds); 0.0 for the inertialess grid, None if mixed."""
        if self.gamma is None:
            return None
        return 0.0 if math.isinf(self.gamma) else 1.0 / self.gamma


def detect_gamma(inertia: np.ndarray, damping: np.ndarray) -> Optional[float]:
    """Return the homogeneous d/m ratio, inf for all-zero inertia, else None."""
    m = np.asarray(inertia, dtype=float)
    d = np.asarray(damping, dtype=float)
    if np.all(m == 0):
        return math.inf
    if np.any(m == 0):
        return None
    ratios = d / m
    ref = ratios.mean()
    if np.all(np.abs(ratios - ref) <= GAMMA_RTOL * abs(ref)):
        return float(ref)
    return None


def assign_parameters(
    grid: GridNetwork,
    scheme: str,
    alpha: float = 1.5,
    gamma: Optional[float] = None,
    d_min: Optional[float] = DEFAULT_D_MIN,
) -> DynamicParams:
    """Assign per-node inertia and damping from the grid's power ratings.

    Two schemes:

    ``homogeneous_ratio``
        d_i = alpha * |P_i| / omega_0 at every node and m_i = d_i / gamma,
        so the damping-to-inertia ratio is exactly ``gamma`` everywhere.

    ``realistic``
        Loads are inertialess (m_i = 0) with d_i = alpha * |P_i| / omega_0.
        Generators get m_i = 2 H_i |P_i| / omega_0 from their inertia
        constant H_i (seconds) and damping from ``damping_override`` when
        present, else the same alpha rule.

    Zero-power buses would get zero damping, which the model forbids;
    they receive the floor ``d_min`` instead. Pass ``d_min=None`` to make
    zero-power buses a hard error.
    """
    if scheme not in ("homogeneous_ratio", "realistic"):
        raise ParameterError(f"unknown scheme {scheme!r}")
    if not alpha > 0:
        raise ParameterError("alpha must be > 0")

    w0 = grid.base_frequency
    p_abs = np.abs(grid.power)
    d = alpha * p_abs / w0
    zero = p_abs == 0
    if np.any(zero):
        if d_min is None:
            ids = [grid.buses[k].id for k in np.nonzero(zero)[0]]
            raise ParameterError(
                f"zero-power buses {ids[:5]} would get zero damping; supply a "
                "d_min floor or fix the dispatch"
            )
        d[zero] = d_min

    if scheme == "homogeneous_ratio":
        if gamma is None or not gamma > 0:
            raise ParameterError("homogeneous_ratio scheme requires gamma > 0")
        m = d / gamma
        return DynamicParams(inertia=m, damping=d, gamma=float(gamma))

    # realistic scheme
    m = np.zeros(grid.n)
    for k, bus in enumerate(grid.buses):
        if bus.kind == GENERATOR:
            if bus.inertia_constant is None:
                raise ParameterError(
                    f"bus {bus.id}: realistic scheme requires inertia_constant on "
                    "every generator bus"
                )
            if p_abs[k] == 0:
                raise ParameterError(
                    f"bus {bus.id}: generator with zero power cannot carry inertia "
                    "in the realistic scheme; fix the dispatch"
                )
            m[k] = 2.0 * bus.inertia_constant * p_abs[k] / w0
        if bus.damping_override is not None:
            d[k] = bus.damping_override
    return DynamicParams(inertia=m, damping=d, gamma=detect_gamma(m, d))


# ---------------------------------------------------------------------------
# native format I/O
# ---------------------------------------------------------------------------

def parse_grid(source, format: str = "json") -> GridNetwork:
    """Parse and validate a grid document.

    ``source`` may be bytes, a string, or a readable file object. Only the
    native JSON format is currently defined.
    """
    if format != "json":
        raise GridFormatError(f"unknown grid format {format!r}")
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as e:
        raise GridFormatError(
            f"invalid JSON: {e.msg}", location=f"line {e.lineno} column {e.colno}"
        ) from e
    return grid_from_dict(doc)


def load_grid(path) -> GridNetwork:
    """Read a grid file from disk."""
    with io.open(path, "rb") as f:
        return parse_grid(f)


def _require(doc: dict, key: str, types, location: str):
    if key not in doc:
        raise GridFormatError(f"missing required field {key!r}", location=location)
    val = doc[key]
    if not isinstance(val, types):
        raise GridFormatError(
            f"field {key!r} has wrong type {type(val).__name__}", location=location
        )
    return val


def grid_from_dict(doc: dict) -> GridNetwork:
    """Build a validated GridNetwork from a parsed JSON document."""
    if not isinstance(doc, dict):
        raise GridFormatError("top-level document must be an object")
    version = _require(doc, "version", int, "header")
    if version != FORMAT_VERSION:
        raise GridFormatError(f"unsupported format version {version}", location="header")
    hz = _require(doc, "base_frequency_hz", (int, float), "header")
    units = _require(doc, "unit_system", str, "header")
    buses_doc = _require(doc, "buses", list, "document")
    lines_doc = _require(doc, "lines", list, "document")

    buses = []
    for k, b in enumerate(buses_doc):
        loc = f"buses[{k}]"
        if not isinstance(b, dict):
            raise GridFormatError("bus entry must be an object", location=loc)
        bus_id = _require(b, "id", int, loc)
        kind = _require(b, "kind", str, loc)
        power = _require(b, "power", (int, float), loc)
        h = b.get("inertia_constant")
        if h is not None and not isinstance(h, (int, float)):
            raise GridFormatError("inertia_constant must be a number", location=loc)
        dov = b.get("damping_override")
        if dov is not None and not isinstance(dov, (int, float)):
            raise GridFormatError("damping_override must be a number", location=loc)
        unknown = set(b) - {"id", "kind", "power", "inertia_constant", "damping_override"}
        if unknown:
            raise GridFormatError(f"unknown bus fields {sorted(unknown)}", location=loc)
        buses.append(
            Bus(
                id=bus_id,
                kind=kind,
                power=float(power),
                inertia_constant=None if h is None else float(h),
                damping_override=None if dov is None else float(dov),
            )
        )

    lines = []
    for k, l in enumerate(lines_doc):
        loc = f"lines[{k}]"
        if not isinstance(l, dict):
            raise GridFormatError("line entry must be an object", location=loc)
        i = _require(l, "from", int, loc)
        j = _require(l, "to", int, loc)
        b = _require(l, "susceptance", (int, float), loc)
        unknown = set(l) - {"from", "to", "susceptance"}
        if unknown:
            raise GridFormatError(f"unknown line fields {sorted(unknown)}", location=loc)
        lines.append(Line(from_bus=i, to_bus=j, susceptance=float(b)))

    metadata = doc.get("metadata")
    if metadata is not None and not isinstance(metadata, dict):
        raise GridFormatError("metadata must be an object", location="header")

    return GridNetwork(
        buses=tuple(buses),
        lines=tuple(lines),
        base_frequency_hz=float(hz),
        unit_system=units,
        metadata=metadata,
    )


def grid_to_dict(grid: GridNetwork) -> dict:
    doc = {
        "version": FORMAT_VERSION,
        "base_frequency_hz": grid.base_frequency_hz,
        "unit_system": grid.unit_system,
    }
    if grid.metadata is not None:
        doc["metadata"] = grid.metadata
    doc["buses"] = []
    for b in grid.buses:
        entry = {"id": b.id, "kind": b.kind, "power": b.power}
        if b.inertia_constant is not None:
            entry["inertia_constant"] = b.inertia_constant
        if b.damping_override is not None:
            entry["damping_override"] = b.damping_override
        doc["buses"].append(entry)
    doc["lines"] = [
        {"from": l.from_bus, "to": l.to_bus, "susceptance": l.susceptance}
        for l in grid.lines
    ]
    return doc


def serialize_grid(grid: GridNetwork) -> str:
    """Canonical textual form; parse_grid(serialize_grid(g)) reproduces g."""
    return json.dumps(grid_to_dict(grid), indent=2) + "\n"


def save_grid(grid: GridNetwork, path) -> None:
    with io.open(path, "w", encoding="utf-8") as f:
        f.write(serialize_grid(grid))
