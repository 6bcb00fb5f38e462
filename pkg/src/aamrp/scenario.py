"""Scenario files: flat ``section.key = value`` lines.

Example::

    # mobility and radio
    world.n_nodes = 50
    world.max_speed = 10
    ants.rho = 0.1
    sweep.node_counts = 25, 50, 75, 100
    sweep.seeds = 1..10

Blank lines and ``#`` comments are ignored. Lists are comma separated
(optionally in brackets); ``a..b`` expands to an inclusive integer range.
Anything not given keeps its default.
"""
from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field

from .ant_tree import AntParams
from .cluster import RangeConfig
from .engine import PROTOCOLS, Scenario, TrafficConfig, TransportModel, TreeConfig
from .topology import WorldConfig


class ScenarioParseError(ValueError):
    def __init__(self, line: int, key: str, message: str):
        self.line, self.key, self.message = line, key, message
        super().__init__(f"line {line}: {key}: {message}")


@dataclass
class SweepConfig:
    node_counts: list[int] = field(default_factory=lambda: [25, 50, 75, 100])
    group_sizes: list[int] = field(default_factory=lambda: [1, 2, 3, 4])
    seeds: list[int] = field(default_factory=lambda: list(range(1, 11)))
    protocols: list[str] = field(default_factory=lambda: list(PROTOCOLS))
    # group size held fixed while node count varies, and vice versa
    node_sweep_group_size: int = 4
    group_sweep_nodes: int = 50

    def violations(self) -> list[tuple[str, str]]:
        out = []
        for name in ("node_counts", "group_sizes", "seeds", "protocols"):
            if not getattr(self, name):
                out.append((f"sweep.{name}", "must not be empty"))
        if len(set(self.seeds)) != len(self.seeds):
            out.append(("sweep.seeds", "seeds must be distinct"))
        for p in self.protocols:
            if p not in PROTOCOLS:
                out.append(("sweep.protocols", f"unknown protocol {p!r}; choose from {', '.join(PROTOCOLS)}"))
        if any(n < 1 for n in self.node_counts) or self.group_sweep_nodes < 1:
            out.append(("sweep.node_counts", "node counts must be >= 1"))
        if any(g < 0 for g in self.group_sizes) or self.node_sweep_group_size < 0:
            out.append(("sweep.group_sizes", "group sizes must be >= 0"))
        return out


@dataclass
class OutputConfig:
    csv: str = "metrics.csv"
    trace: bool = False
    convergence: bool = False
    plots: bool = True


@dataclass
class ScenarioFile:
    world: WorldConfig = field(default_factory=WorldConfig)
    protocol: RangeConfig = field(default_factory=RangeConfig)
    tree: TreeConfig = field(default_factory=TreeConfig)
    ants: AntParams = field(default_factory=AntParams)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    transport: TransportModel = field(default_factory=TransportModel)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def scenario(self, protocol: str, n_nodes: int, group_size: int) -> Scenario:
        """Engine scenario for one sweep point."""
        world = dataclasses.replace(self.world, n_nodes=n_nodes, k_hops=self.protocol.k_hops)
        proto = dataclasses.replace(self.protocol, tick=self.world.tick)
        traffic = dataclasses.replace(self.traffic, group_size=group_size)
        return Scenario(world, proto, dataclasses.replace(self.tree), dataclasses.replace(self.ants),
                        traffic, dataclasses.replace(self.transport), protocol)

    def violations(self) -> list[tuple[str, str]]:
        out = self.sweep.violations()
        for n, g in sweep_points(self.sweep):
            for path, msg in self.scenario("aamrp", n, g).violations():
                if path == "traffic.group_size":
                    msg = f"{msg} (n_nodes={n}, group_size={g})"
                if (path, msg) not in out:
                    out.append((path, msg))
        return out

    def fingerprint(self) -> str:
        """Hash of everything that influences a run, for resume markers."""
        text = "\n".join(resolved_lines(self, include_sweep=False))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


SECTIONS = {f.name for f in dataclasses.fields(ScenarioFile)}
# derived from other keys, so not settable on their own
HIDDEN = {("world", "k_hops"), ("world", "n_nodes"), ("protocol", "tick"), ("traffic", "group_size"),
          ("world", "rng_seed")}


def sweep_points(sw: SweepConfig) -> list[tuple[int, int]]:
    """(n_nodes, group_size) pairs: the node sweep plus the group sweep, deduplicated and sorted."""
    pts = {(n, sw.node_sweep_group_size) for n in sw.node_counts}
    pts |= {(sw.group_sweep_nodes, g) for g in sw.group_sizes}
    return sorted(pts)


def _parse_bool(text: str) -> bool:
    t = text.lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_int(text: str) -> int:
    v = float(text)
    if not v.is_integer():
        raise ValueError(f"expected an integer, got {text!r}")
    return int(v)


def _parse_list(text: str, item) -> list:
    t = text.strip()
    if t.startswith("[") and t.endswith("]"):
        t = t[1:-1]
    out = []
    for part in (p.strip() for p in t.split(",")):
        if not part:
            continue
        if ".." in part and item is _parse_int:
            lo, hi = part.split("..", 1)
            out.extend(range(_parse_int(lo), _parse_int(hi) + 1))
        else:
            out.append(item(part))
    return out


def _coerce(type_name: str, text: str):
    if type_name == "bool":
        return _parse_bool(text)
    if type_name == "int":
        return _parse_int(text)
    if type_name == "float":
        return float(text)
    if type_name == "str":
        return text.strip().strip('"').strip("'")
    if type_name == "list[int]":
        return _parse_list(text, _parse_int)
    if type_name == "list[str]":
        return _parse_list(text, lambda s: s.strip().strip('"').strip("'"))
    raise ValueError(f"unsupported field type {type_name}")


def _field_types(obj) -> dict[str, str]:
    return {f.name: str(f.type) for f in dataclasses.fields(obj)}


def parse_scenario(text: str) -> ScenarioFile:
    defaults = ScenarioFile()
    overrides: dict[str, dict] = {name: {} for name in SECTIONS}
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioParseError(lineno, line, "expected 'section.key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key in seen:
            raise ScenarioParseError(lineno, key, f"already set on line {seen[key]}")
        seen[key] = lineno
        if key.count(".") != 1:
            raise ScenarioParseError(lineno, key, "keys look like 'section.name'")
        section, name = key.split(".")
        if section not in SECTIONS:
            raise ScenarioParseError(lineno, key, f"unknown section {section!r}; known: {', '.join(sorted(SECTIONS))}")
        types = _field_types(getattr(defaults, section))
        if name not in types or (section, name) in HIDDEN:
            hint = {("world", "k_hops"): "set protocol.k_hops",
                    ("world", "n_nodes"): "set sweep.node_counts",
                    ("traffic", "group_size"): "set sweep.group_sizes",
                    ("protocol", "tick"): "set world.tick",
                    ("world", "rng_seed"): "set sweep.seeds"}.get((section, name), "unknown key")
            raise ScenarioParseError(lineno, key, hint)
        if value == "":
            raise ScenarioParseError(lineno, key, "missing value")
        try:
            overrides[section][name] = _coerce(types[name], value)
        except ValueError as e:
            raise ScenarioParseError(lineno, key, str(e)) from None
    return ScenarioFile(**{sec: dataclasses.replace(getattr(defaults, sec), **kw)
                           for sec, kw in overrides.items()})


def load_scenario(path) -> ScenarioFile:
    with open(path) as fh:
        return parse_scenario(fh.read())


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, list):
        return ", ".join(str(x) for x in v)
    return str(v)


def resolved_lines(sf: ScenarioFile, include_sweep: bool = True) -> list[str]:
    out = []
    for section in (f.name for f in dataclasses.fields(sf)):
        if not include_sweep and section in ("sweep", "output"):
            continue
        obj = getattr(sf, section)
        for f in dataclasses.fields(obj):
            if (section, f.name) in HIDDEN:
                continue
            out.append(f"{section}.{f.name} = {_fmt_value(getattr(obj, f.name))}")
    return out
