"""Scenario and sweep configuration files.

Both are INI files (``configparser`` syntax: ``[section]`` headers,
``key = value`` lines, ``#`` or ``;`` comments). Objects sharing the road with
the ego get one section each, named ``[object <id>]``.

A scenario file::

    [scenario]
    name = stationary-object      # or ramp-merge
    duration = 60
    seed = 0                      # used when no seed is given on the command line

    [road]
    lanes = main:0, ramp:-3.7     # lane-id:centerline-offset pairs
    lane_width = 3.7
    merge_point = 150             # ramp-merge only
    ramp_lane = ramp

    [ego]
    y = 0
    v = 29.1667

    [object object]
    kind = stationary-object
    lane = main
    y = 405
    v = 0

    [sensor]
    range = 60                    # limited-range sensor (stationary-object)
    detection = threshold
    # sigma0 / tau / correlation / target for the velocity-noise sensor

    [idm]      s0, rho, v_desired, a_max, b_safe, b_max
    [motion]   tau
    [search]   depth, budget, c_uct, epsilon, discount, reward_scale
    [risk]     alpha
    [cost]     closeness, crash, hard_brake, jerk, velocity
    [planner]  kind, w0, closeness, substeps, rollout_noise, engine, workers

Every section but ``[scenario]`` is optional and falls back to the library
defaults. A sweep file has one ``[sweep]`` section; see :class:`SweepSpec`.
Errors are raised as :class:`ConfigError` carrying the file and line.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

from .highway import CostWeights, MotionParams
from .idm import IdmParams
from .mcts import SearchConfig
from .planner import PLANNER_KINDS, PlannerConfig
from .qmdp import RiskConfig
from .simulator import (
    LimitedRangeSensor,
    ObjectSpec,
    ScenarioConfig,
    VelocityNoiseSensor,
    ramp_merge_scenario,
    stationary_object_scenario,
)
from .traffic import Lane, ObjectKind, RoadModel

SWEEP_PARAMETERS = ("alpha", "epsilon", "sensor-range", "planner")


class ConfigError(ValueError):
    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        where = f"{path or '<config>'}:{line}: " if line else f"{path or '<config>'}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioConfig
    planner: PlannerConfig
    seed: int = 0


@dataclass(frozen=True)
class SweepSpec:
    """Cross product of one parameter's values with a list of seeds.

    ``ranges`` optionally adds a sensor-range axis (one plot per range);
    ``scenario`` is the path of the base scenario file.
    """

    parameter: str
    values: Tuple
    seeds: Tuple[int, ...]
    scenario: str
    ranges: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMETERS:
            raise ValueError(f"parameter must be one of {SWEEP_PARAMETERS}, got {self.parameter!r}")
        if not self.values:
            raise ValueError("values must not be empty")
        if not self.seeds:
            raise ValueError("seeds must not be empty")


class _Source:
    """Parsed INI text plus the line of every section header and key."""

    _SECTION = re.compile(r"^\s*\[([^\]]+)\]")
    _KEY = re.compile(r"^\s*([^#;=:\s][^=:]*?)\s*[=:]")

    def __init__(self, text: str, path: Optional[str]):
        self.path = path
        self.parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
        try:
            self.parser.read_string(text, source=path or "<config>")
        except configparser.Error as e:
            line = getattr(e, "lineno", None)
            raise ConfigError(str(e).splitlines()[0], path, line) from None
        self.lines: Dict[Tuple[str, Optional[str]], int] = {}
        section = None
        for no, raw in enumerate(text.splitlines(), start=1):
            m = self._SECTION.match(raw)
            if m:
                section = m.group(1).strip()
                self.lines[(section, None)] = no
                continue
            m = self._KEY.match(raw)
            if m and section is not None and not raw[:1].isspace():
                self.lines.setdefault((section, m.group(1).strip().lower()), no)

    def error(self, section: str, key: Optional[str], message: str) -> ConfigError:
        line = self.lines.get((section, key)) or self.lines.get((section, None))
        name = f"[{section}] {key}" if key else f"[{section}]"
        return ConfigError(f"{name}: {message}", self.path, line)

    def has(self, section: str) -> bool:
        return self.parser.has_section(section)

    def keys(self, section: str) -> List[str]:
        return list(self.parser[section].keys()) if self.has(section) else []

    def get(self, section: str, key: str, conv: Callable, default=None):
        if not self.has(section) or key not in self.parser[section]:
            return default
        raw = self.parser[section][key]
        try:
            return conv(raw)
        except (TypeError, ValueError) as e:
            raise self.error(section, key, f"cannot read {raw!r}: {e}") from None


def _float(s: str) -> float:
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _int(s: str) -> int:
    return int(s.strip())


def _str(s: str) -> str:
    return s.strip()


def _list(conv: Callable) -> Callable:
    def parse(s: str):
        items = [x.strip() for x in s.split(",") if x.strip()]
        return tuple(conv(x) for x in items)

    return parse


def _lanes(s: str) -> Tuple[Tuple[str, float], ...]:
    out = []
    for item in _list(_str)(s):
        if ":" not in item:
            raise ValueError(f"lane {item!r} is not of the form id:offset")
        lid, off = item.split(":", 1)
        out.append((lid.strip(), _float(off)))
    return tuple(out)


_TYPES = {float: _float, int: _int, str: _str}
_ANNOTATIONS = {"float": float, "int": int, "str": str}


def _section_dataclass(src: _Source, section: str, base, aliases: Optional[Dict[str, str]] = None):
    """Override the fields of dataclass instance ``base`` from ``section``."""
    aliases = aliases or {}
    convs = {f.name: _TYPES[_ANNOTATIONS[str(f.type)]] for f in fields(base) if str(f.type) in _ANNOTATIONS}
    allowed = set(convs) | set(aliases)
    for key in src.keys(section):
        if key not in allowed:
            raise src.error(section, key, f"unknown key; expected one of {sorted(allowed)}")
    updates = {}
    for key in src.keys(section):
        name = aliases.get(key, key)
        updates[name] = src.get(section, key, convs[name])
    return _build(src, section, lambda: replace(base, **updates), updates)


def _build(src: _Source, section: str, make: Callable, keys):
    """Call ``make`` and turn validation errors into line-anchored ones."""
    try:
        return make()
    except ValueError as e:
        msg = str(e)
        for key in keys:
            if re.search(rf"\b{re.escape(key)}\b", msg):
                raise src.error(section, key, msg) from None
        raise src.error(section, None, msg) from None


def _road(src: _Source, name: str) -> RoadModel:
    sec = "road"
    width = src.get(sec, "lane_width", _float, 3.7)
    default_lanes = (("main", 0.0), ("ramp", -3.7)) if name == "ramp-merge" else (("main", 0.0),)
    lanes = src.get(sec, "lanes", _lanes, default_lanes)
    merge = src.get(sec, "merge_point", _float, 150.0 if name == "ramp-merge" else None)
    ramp = src.get(sec, "ramp_lane", _str, "ramp" if merge is not None else None)
    main = src.get(sec, "main_lane", _str, "main")
    for key in src.keys(sec):
        if key not in ("lanes", "lane_width", "merge_point", "ramp_lane", "main_lane"):
            raise src.error(sec, key, "unknown key")
    return _build(
        src, sec,
        lambda: RoadModel(tuple(Lane(i, o, width) for i, o in lanes), merge, main, ramp),
        ["lanes", "width", "merge_point", "ramp_lane", "main_lane", "merge point", "ramp lane", "main lane"],
    )


def _objects(src: _Source) -> Optional[Tuple[ObjectSpec, ...]]:
    sections = [s for s in src.parser.sections() if s.split()[0] == "object"]
    if not sections:
        return None
    out = []
    for sec in sections:
        parts = sec.split()
        if len(parts) != 2:
            raise src.error(sec, None, "object sections are named [object <id>]")
        for key in src.keys(sec):
            if key not in ("kind", "lane", "x", "y", "v"):
                raise src.error(sec, key, "unknown key; expected kind, lane, x, y, v")
        kind = src.get(sec, "kind", _str, "vehicle")
        try:
            kind = ObjectKind(kind)
        except ValueError:
            raise src.error(sec, "kind", f"unknown kind {kind!r}") from None
        if src.get(sec, "y", _float) is None:
            raise src.error(sec, None, "missing required key y")
        v = src.get(sec, "v", _float, 0.0)
        if v < 0:
            raise src.error(sec, "v", "velocity must be >= 0")
        out.append(
            ObjectSpec(parts[1], src.get(sec, "y", _float), v, kind, src.get(sec, "lane", _str, "main"), src.get(sec, "x", _float))
        )
    return tuple(out)


def _sensor(src: _Source, name: str):
    base = LimitedRangeSensor() if name == "stationary-object" else VelocityNoiseSensor()
    if not src.has("sensor"):
        return base
    return _section_dataclass(src, "sensor", base)


def parse_scenario(text: str, path: Optional[str] = None) -> RunConfig:
    src = _Source(text, path)
    known = {"scenario", "road", "ego", "sensor", "idm", "motion", "search", "risk", "cost", "planner"}
    for sec in src.parser.sections():
        if sec not in known and sec.split()[0] != "object":
            raise src.error(sec, None, f"unknown section; expected one of {sorted(known)} or [object <id>]")
    if not src.has("scenario"):
        raise ConfigError("missing required section [scenario]", path, None)
    name = src.get("scenario", "name", _str)
    if name not in ("stationary-object", "ramp-merge"):
        raise src.error("scenario", "name", f"expected stationary-object or ramp-merge, got {name!r}")
    scen_keys = {"name", "duration", "dt_bp", "mp_per_bp", "post_merge_time", "stop_speed", "seed"}
    for key in src.keys("scenario"):
        if key not in scen_keys:
            raise src.error("scenario", key, f"unknown key; expected one of {sorted(scen_keys)}")

    sensor = _sensor(src, name)
    base = stationary_object_scenario(sensor=sensor) if name == "stationary-object" else ramp_merge_scenario(sensor=sensor)
    road = _road(src, name) if src.has("road") else base.road
    objects = _objects(src)
    kw = dict(
        road=road,
        sensor=sensor,
        objects=objects if objects is not None else base.objects,
        ego_y=src.get("ego", "y", _float, base.ego_y),
        ego_v=src.get("ego", "v", _float, base.ego_v),
        idm=_section_dataclass(src, "idm", IdmParams()),
        cost=_section_dataclass(src, "cost", base.cost),
        motion=_section_dataclass(src, "motion", base.motion),
    )
    for key in src.keys("ego"):
        if key not in ("y", "v"):
            raise src.error("ego", key, "unknown key; expected y, v")
    if kw["ego_v"] < 0:
        raise src.error("ego", "v", "velocity must be >= 0")
    for key, conv in (("duration", _float), ("dt_bp", _float), ("mp_per_bp", _int), ("post_merge_time", _float), ("stop_speed", _float)):
        value = src.get("scenario", key, conv)
        if value is not None:
            kw[key] = value
    scenario = _build(src, "scenario", lambda: replace(base, **kw), ["duration", "dt_bp", "mp_per_bp", "sensor", "merge_point"])
    for o in scenario.objects:
        if o.lane not in road.lane_ids():
            raise src.error(f"object {o.id}", "lane", f"unknown lane {o.lane!r}; road has {list(road.lane_ids())}")

    search = _section_dataclass(src, "search", SearchConfig())
    risk = _section_dataclass(src, "risk", RiskConfig())
    planner = _section_dataclass(src, "planner", PlannerConfig())
    if planner.kind not in PLANNER_KINDS:
        raise src.error("planner", "kind", f"expected one of {PLANNER_KINDS}")
    planner = replace(planner, search=search, risk=risk)
    seed = src.get("scenario", "seed", _int, 0)
    return RunConfig(scenario, planner, seed)


def load_scenario(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e.strerror}", str(path)) from None
    return parse_scenario(text, str(path))


def parse_sweep(text: str, path: Optional[str] = None) -> SweepSpec:
    src = _Source(text, path)
    sec = "sweep"
    if not src.has(sec):
        raise ConfigError("missing required section [sweep]", path, None)
    allowed = ("parameter", "values", "seeds", "scenario", "ranges")
    for key in src.keys(sec):
        if key not in allowed:
            raise src.error(sec, key, f"unknown key; expected one of {list(allowed)}")
    for key in ("parameter", "values", "seeds", "scenario"):
        if src.get(sec, key, _str) is None:
            raise src.error(sec, None, f"missing required key {key}")
    parameter = src.get(sec, "parameter", _str)
    if parameter not in SWEEP_PARAMETERS:
        raise src.error(sec, "parameter", f"expected one of {SWEEP_PARAMETERS}, got {parameter!r}")
    conv = _str if parameter == "planner" else _float
    values = src.get(sec, "values", _list(conv))
    if parameter == "planner":
        for v in values:
            if v not in PLANNER_KINDS:
                raise src.error(sec, "values", f"unknown planner {v!r}")
    scenario = src.get(sec, "scenario", _str)
    if path is not None and not Path(scenario).is_absolute():
        scenario = str(Path(path).parent / scenario)
    spec = _build(
        src, sec,
        lambda: SweepSpec(parameter, values, src.get(sec, "seeds", _list(_int)), scenario, src.get(sec, "ranges", _list(_float), ())),
        ["parameter", "values", "seeds", "ranges"],
    )
    return spec


def load_sweep(path) -> SweepSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read sweep spec: {e.strerror}", str(path)) from None
    return parse_sweep(text, str(path))
