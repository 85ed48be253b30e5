"""Declarative run description and its TOML form.

A scenario file has the sections ``geometry``, ``physics``, ``populations``
(array of tables), ``schedule`` and ``output``. Parsing is strict: unknown
keys, wrong types and dangling ids are reported together, each with the
line it was found on.
"""
from __future__ import annotations

import dataclasses
import hashlib
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import tomli
import tomli_w

from .errors import GeometryError, ParseError, ValidationError
from .geometry import SIDES
from .interaction import MASS_DEPENDENT, MASS_INDEPENDENT
from .potential import DIRICHLET, NEUMANN

log = logging.getLogger(__name__)

BCS = (DIRICHLET, NEUMANN)
MODES = (MASS_DEPENDENT, MASS_INDEPENDENT)


@dataclass(frozen=True)
class ObstacleSpec:
    id: int
    rect: tuple  # (i0, i1, k0, k1), half-open cell ranges
    bc: str = DIRICHLET


@dataclass(frozen=True)
class TargetSpec:
    id: int
    side: str
    start: int
    stop: int


@dataclass(frozen=True)
class InletSpec:
    population: int
    side: str
    start: int
    stop: int


@dataclass(frozen=True)
class GeometryConfig:
    m: int
    obstacles: tuple = ()
    targets: tuple = ()
    inlets: tuple = ()
    walls: tuple = ()  # ((side, bc), ...); unlisted sides are Dirichlet
    inlet_bc: str = NEUMANN


@dataclass(frozen=True)
class PhysicsConfig:
    dt: float
    alpha: float = 1.0
    radius: float = 0.1
    theta_max: float = math.pi / 2
    anisotropic: bool = True
    mode: str = MASS_DEPENDENT
    wall_density: float = 0.0
    retrograde_guard: bool = False
    laplace_tol: float = 1e-8
    grad_eps: float | None = None


@dataclass(frozen=True)
class Blob:
    rect: tuple
    density: float


@dataclass(frozen=True)
class Inflow:
    inlet: int  # index into geometry.inlets
    density: float
    start: int = 0
    stop: int | None = None
    perturbation: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class PopulationConfig:
    id: int
    beta: tuple  # interaction row, one entry per population
    targets: tuple | None = None  # None: every target
    blobs: tuple = ()
    inflows: tuple = ()


@dataclass(frozen=True)
class Schedule:
    n_steps: int
    snapshot_every: int = 1
    mass_epsilon: float = 1e-6


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    images: bool = False


@dataclass(frozen=True)
class Scenario:
    name: str
    geometry: GeometryConfig
    physics: PhysicsConfig
    populations: tuple
    schedule: Schedule
    output: OutputConfig = field(default_factory=OutputConfig)


# --- serialization -----------------------------------------------------------


def _plain(obj):
    """Scenario as nested dicts/lists with ``None`` fields dropped."""
    if dataclasses.is_dataclass(obj):
        out = {}
        for f in dataclasses.fields(obj):
            val = getattr(obj, f.name)
            if val is None:
                continue
            if f.name == "walls":
                out[f.name] = {side: bc for side, bc in val}
            else:
                out[f.name] = _plain(val)
        return out
    if isinstance(obj, (tuple, list)):
        return [_plain(v) for v in obj]
    return obj


def to_dict(scenario: Scenario) -> dict:
    return _plain(scenario)


def dumps(scenario: Scenario) -> str:
    return tomli_w.dumps(to_dict(scenario))


def digest(scenario: Scenario) -> str:
    return hashlib.sha256(dumps(scenario).encode()).hexdigest()


def write_scenario(scenario: Scenario, path) -> Path:
    path = Path(path)
    path.write_text(dumps(scenario), encoding="utf-8")
    return path


# --- parsing -----------------------------------------------------------------

_HEADER = re.compile(r"^\s*(\[\[?)\s*([A-Za-z0-9_.]+)\s*\]\]?")
_KEY = re.compile(r"^\s*([A-Za-z0-9_]+)\s*=")


def _line_index(text: str) -> dict:
    """Map ``path.key`` (array tables as ``name[i]``) to its 1-based line."""
    lines: dict = {}
    counts: dict = {}
    parents: dict = {}
    current = ""
    for n, line in enumerate(text.splitlines(), start=1):
        hm = _HEADER.match(line)
        if hm:
            parts = hm.group(2).split(".")
            # resolve a nested array table under the latest element of its parent
            prefix = ""
            for p in parts[:-1]:
                name = f"{prefix}.{p}" if prefix else p
                prefix = parents.get(name, name)
            name = f"{prefix}.{parts[-1]}" if prefix else parts[-1]
            if hm.group(1) == "[[":
                idx = counts.get(name, 0)
                counts[name] = idx + 1
                current = f"{name}[{idx}]"
                parents[".".join(parts)] = current
            else:
                current = name
            lines.setdefault(current, n)
            continue
        km = _KEY.match(line)
        if km:
            key = f"{current}.{km.group(1)}" if current else km.group(1)
            lines.setdefault(key, n)
    return lines


class _Checker:
    def __init__(self, lines: dict):
        self.lines = lines
        self.errors: list[str] = []

    def line(self, path: str) -> int | None:
        while path:
            if path in self.lines:
                return self.lines[path]
            if "." not in path:
                break
            path = path.rsplit(".", 1)[0]
        return None

    def error(self, path: str, msg: str):
        ln = self.line(path)
        where = f"line {ln}: " if ln else ""
        self.errors.append(f"{where}{path}: {msg}")

    def table(self, data, path: str, allowed, required=()):
        if not isinstance(data, dict):
            self.error(path, "expected a table")
            return {}
        for key in data:
            if key not in allowed:
                self.error(f"{path}.{key}" if path else key, "unknown key")
        for key in required:
            if key not in data:
                self.error(path, f"missing required key {key!r}")
        return data

    def get(self, data, path, key, kind, default=dataclasses.MISSING, check=None, msg=None):
        full = f"{path}.{key}" if path else key
        if key not in data:
            if default is dataclasses.MISSING:
                return None
            return default
        val = data[key]
        ok_type = {
            int: lambda v: isinstance(v, int) and not isinstance(v, bool),
            float: lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
            bool: lambda v: isinstance(v, bool),
            str: lambda v: isinstance(v, str),
        }[kind]
        if not ok_type(val):
            self.error(full, f"expected {kind.__name__}, got {type(val).__name__}")
            return default if default is not dataclasses.MISSING else None
        if kind is float:
            val = float(val)
        if check is not None and not check(val):
            self.error(full, msg or f"invalid value {val!r}")
        return val

    def int_list(self, data, path, key, length=None):
        full = f"{path}.{key}"
        val = data.get(key)
        if val is None:
            return None
        if not isinstance(val, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in val):
            self.error(full, "expected an array of integers")
            return None
        if length is not None and len(val) != length:
            self.error(full, f"expected {length} entries, got {len(val)}")
            return None
        return tuple(val)

    def array_of_tables(self, data, path, key):
        full = f"{path}.{key}" if path else key
        val = data.get(key, [])
        if not isinstance(val, list) or not all(isinstance(v, dict) for v in val):
            self.error(full, "expected an array of tables")
            return []
        return val


def _rect_ok(rect, m) -> bool:
    i0, i1, k0, k1 = rect
    return 0 <= i0 < i1 <= m and 0 <= k0 < k1 <= m


def _build(raw: dict, ck: _Checker) -> Scenario | None:
    ck.table(raw, "", ("name", "geometry", "physics", "populations", "schedule", "output"),
             ("geometry", "physics", "populations", "schedule"))
    name = ck.get(raw, "", "name", str, "scenario")

    # geometry
    g = ck.table(raw.get("geometry", {}), "geometry",
                 ("m", "obstacles", "targets", "inlets", "walls", "inlet_bc"), ("m",))
    m = ck.get(g, "geometry", "m", int, None, lambda v: v >= 4, "m must be >= 4")
    obstacles = []
    for n, o in enumerate(ck.array_of_tables(g, "geometry", "obstacles")):
        p = f"geometry.obstacles[{n}]"
        ck.table(o, p, ("id", "rect", "bc"), ("id", "rect"))
        rect = ck.int_list(o, p, "rect", 4)
        if rect is not None and m is not None and not _rect_ok(rect, m):
            ck.error(f"{p}.rect", f"rectangle {list(rect)} outside the {m}x{m} grid")
        obstacles.append(ObstacleSpec(
            ck.get(o, p, "id", int), rect,
            ck.get(o, p, "bc", str, DIRICHLET, lambda v: v in BCS, f"bc must be one of {BCS}"),
        ))
    targets = []
    for n, t in enumerate(ck.array_of_tables(g, "geometry", "targets")):
        p = f"geometry.targets[{n}]"
        ck.table(t, p, ("id", "side", "start", "stop"), ("id", "side", "start", "stop"))
        targets.append(TargetSpec(
            ck.get(t, p, "id", int, None, lambda v: v >= 0, "target id must be >= 0"),
            ck.get(t, p, "side", str, None, lambda v: v in SIDES, f"side must be one of {SIDES}"),
            ck.get(t, p, "start", int), ck.get(t, p, "stop", int),
        ))
    inlets = []
    for n, i in enumerate(ck.array_of_tables(g, "geometry", "inlets")):
        p = f"geometry.inlets[{n}]"
        ck.table(i, p, ("population", "side", "start", "stop"), ("population", "side", "start", "stop"))
        inlets.append(InletSpec(
            ck.get(i, p, "population", int),
            ck.get(i, p, "side", str, None, lambda v: v in SIDES, f"side must be one of {SIDES}"),
            ck.get(i, p, "start", int), ck.get(i, p, "stop", int),
        ))
    walls_raw = ck.table(g.get("walls", {}), "geometry.walls", SIDES)
    walls = []
    for side in SIDES:
        if side in walls_raw:
            walls.append((side, ck.get(walls_raw, "geometry.walls", side, str, DIRICHLET,
                                       lambda v: v in BCS, f"wall bc must be one of {BCS}")))
    inlet_bc = ck.get(g, "geometry", "inlet_bc", str, NEUMANN, lambda v: v in BCS, f"inlet_bc must be one of {BCS}")
    geometry = GeometryConfig(m, tuple(obstacles), tuple(targets), tuple(inlets), tuple(walls), inlet_bc)

    # physics
    ph = ck.table(raw.get("physics", {}), "physics",
                  [f.name for f in dataclasses.fields(PhysicsConfig)], ("dt",))
    pos = lambda v: v > 0  # noqa: E731
    physics = PhysicsConfig(
        dt=ck.get(ph, "physics", "dt", float, None, pos, "dt must be positive"),
        alpha=ck.get(ph, "physics", "alpha", float, 1.0, pos, "alpha must be positive"),
        radius=ck.get(ph, "physics", "radius", float, 0.1, pos, "radius must be positive"),
        theta_max=ck.get(ph, "physics", "theta_max", float, math.pi / 2,
                         lambda v: 0 < v <= math.pi / 2 + 1e-15, "theta_max must lie in (0, pi/2]"),
        anisotropic=ck.get(ph, "physics", "anisotropic", bool, True),
        mode=ck.get(ph, "physics", "mode", str, MASS_DEPENDENT, lambda v: v in MODES, f"mode must be one of {MODES}"),
        wall_density=ck.get(ph, "physics", "wall_density", float, 0.0, lambda v: v >= 0, "wall_density must be >= 0"),
        retrograde_guard=ck.get(ph, "physics", "retrograde_guard", bool, False),
        laplace_tol=ck.get(ph, "physics", "laplace_tol", float, 1e-8, pos, "laplace_tol must be positive"),
        grad_eps=ck.get(ph, "physics", "grad_eps", float, None, pos, "grad_eps must be positive"),
    )

    # populations
    pops_raw = ck.array_of_tables(raw, "", "populations")
    if not pops_raw and "populations" in raw:
        ck.error("populations", "at least one population is required")
    n_pop = len(pops_raw)
    populations = []
    for n, pr in enumerate(pops_raw):
        p = f"populations[{n}]"
        ck.table(pr, p, ("id", "beta", "targets", "blobs", "inflows"), ("id", "beta"))
        pid = ck.get(pr, p, "id", int)
        if pid is not None and pid != n:
            ck.error(f"{p}.id", f"population ids must be 0..{n_pop - 1} in order, got {pid}")
        beta = pr.get("beta")
        if not isinstance(beta, list) or not all(isinstance(b, (int, float)) and not isinstance(b, bool) for b in beta):
            ck.error(f"{p}.beta", "expected an array of numbers")
            beta = ()
        else:
            beta = tuple(float(b) for b in beta)
            if len(beta) != n_pop:
                ck.error(f"{p}.beta", f"expected {n_pop} entries (one per population), got {len(beta)}")
            for j, b in enumerate(beta):
                if j != n and b < 0:
                    ck.error(f"{p}.beta", f"cross-population entry beta[{j}] must be >= 0")
        tg = ck.int_list(pr, p, "targets")
        blobs = []
        for b_i, b in enumerate(ck.array_of_tables(pr, p, "blobs")):
            bp = f"{p}.blobs[{b_i}]"
            ck.table(b, bp, ("rect", "density"), ("rect", "density"))
            rect = ck.int_list(b, bp, "rect", 4)
            if rect is not None and m is not None and not _rect_ok(rect, m):
                ck.error(f"{bp}.rect", f"rectangle {list(rect)} outside the {m}x{m} grid")
            blobs.append(Blob(rect, ck.get(b, bp, "density", float, None, lambda v: v >= 0, "density must be >= 0")))
        inflows = []
        for f_i, f in enumerate(ck.array_of_tables(pr, p, "inflows")):
            fp = f"{p}.inflows[{f_i}]"
            ck.table(f, fp, [x.name for x in dataclasses.fields(Inflow)], ("inlet", "density"))
            inflows.append(Inflow(
                inlet=ck.get(f, fp, "inlet", int),
                density=ck.get(f, fp, "density", float, None, lambda v: v >= 0, "density must be >= 0"),
                start=ck.get(f, fp, "start", int, 0, lambda v: v >= 0, "start must be >= 0"),
                stop=ck.get(f, fp, "stop", int, None),
                perturbation=ck.get(f, fp, "perturbation", float, 0.0, lambda v: 0 <= v < 1, "perturbation must lie in [0, 1)"),
                seed=ck.get(f, fp, "seed", int, 0),
            ))
        populations.append(PopulationConfig(pid, beta, tg, tuple(blobs), tuple(inflows)))

    s = ck.table(raw.get("schedule", {}), "schedule", ("n_steps", "snapshot_every", "mass_epsilon"), ("n_steps",))
    schedule = Schedule(
        ck.get(s, "schedule", "n_steps", int, None, lambda v: v >= 0, "n_steps must be >= 0"),
        ck.get(s, "schedule", "snapshot_every", int, 1, lambda v: v >= 1, "snapshot_every must be >= 1"),
        ck.get(s, "schedule", "mass_epsilon", float, 1e-6, lambda v: 0 < v < 1, "mass_epsilon must lie in (0, 1)"),
    )
    o = ck.table(raw.get("output", {}), "output", ("directory", "images"))
    output = OutputConfig(ck.get(o, "output", "directory", str, "out"), ck.get(o, "output", "images", bool, False))

    if ck.errors:
        return None
    return Scenario(name, geometry, physics, tuple(populations), schedule, output)


def validate(scenario: Scenario, ck: _Checker | None = None) -> list[str]:
    """Cross-reference checks; returns error messages (empty when valid)."""
    from .engine import build_scenario_grid

    ck = ck or _Checker({})
    geo = scenario.geometry
    m = geo.m
    if not scenario.physics.dt > 0:
        ck.error("physics.dt", "dt must be positive")
    if scenario.schedule.snapshot_every < 1:
        ck.error("schedule.snapshot_every", "snapshot_every must be >= 1")
    if not scenario.populations:
        ck.error("populations", "at least one population is required")
    seen = set()
    for n, o in enumerate(geo.obstacles):
        if o.id in seen:
            ck.error(f"geometry.obstacles[{n}].id", f"duplicate obstacle id {o.id}")
        seen.add(o.id)
    tids = [t.id for t in geo.targets]
    n_pop = len(scenario.populations)
    for n, inl in enumerate(geo.inlets):
        if not 0 <= inl.population < n_pop:
            ck.error(f"geometry.inlets[{n}].population", f"unknown population {inl.population}")
    grid = None
    if not ck.errors:
        try:
            grid = build_scenario_grid(scenario)
        except (GeometryError, ValueError) as err:
            ck.error("geometry", str(err))
    for n, pop in enumerate(scenario.populations):
        p = f"populations[{n}]"
        if pop.id != n:
            ck.error(f"{p}.id", f"population ids must be 0..{n_pop - 1} in order, got {pop.id}")
        if len(pop.beta) != n_pop:
            ck.error(f"{p}.beta", f"expected {n_pop} entries, got {len(pop.beta)}")
        if pop.targets is not None:
            for t in pop.targets:
                if t not in tids:
                    ck.error(f"{p}.targets", f"unknown target id {t}")
        for b_i, blob in enumerate(pop.blobs):
            if grid is not None and grid.obstacle[blob.rect[0]:blob.rect[1], blob.rect[2]:blob.rect[3]].any():
                if blob.density > 0:
                    ck.error(f"{p}.blobs[{b_i}].rect", "blob covers obstacle cells")
        for f_i, f in enumerate(pop.inflows):
            fp = f"{p}.inflows[{f_i}]"
            if not 0 <= f.inlet < len(geo.inlets):
                ck.error(f"{fp}.inlet", f"unknown inlet index {f.inlet}")
            elif geo.inlets[f.inlet].population != pop.id:
                ck.error(f"{fp}.inlet", f"inlet {f.inlet} belongs to population {geo.inlets[f.inlet].population}")
            if f.stop is not None and f.stop < f.start:
                ck.error(f"{fp}.stop", "stop must be >= start")
    alpha, dt = scenario.physics.alpha, scenario.physics.dt
    if m and dt > 0 and alpha * dt > 1.0 / m:
        log.warning("alpha*dt = %.4g exceeds h = %.4g; the run will violate the CFL bound", alpha * dt, 1.0 / m)
    return ck.errors


def loads(text: str) -> Scenario:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as err:
        raise ParseError([str(err)]) from None
    ck = _Checker(_line_index(text))
    scenario = _build(raw, ck)
    if scenario is None:
        raise ValidationError(ck.errors)
    errors = validate(scenario, ck)
    if errors:
        raise ValidationError(errors)
    return scenario


def parse_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as err:
        raise ParseError([f"{path}: not UTF-8 ({err})"]) from None
    return loads(text)
