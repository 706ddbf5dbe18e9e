"""Case data: buses, branches, generators, areas, and the multi-area topology."""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field, fields
from functools import cached_property
from typing import IO, Iterable

import numpy as np


class CaseError(ValueError):
    """Raised for malformed or inconsistent case data.

    ``path`` points at the offending field, e.g. ``generators[2].bus_id``.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


def natural_key(s: str):
    return [int(tok) if tok.isdigit() else tok for tok in re.split(r"(\d+)", s)]


@dataclass(frozen=True)
class Bus:
    id: str
    area_id: str
    demand: tuple[float, ...]


@dataclass(frozen=True)
class Branch:
    id: str
    from_bus: str
    to_bus: str
    reactance: float
    flow_limit: float


@dataclass(frozen=True)
class GeneratorParams:
    id: str
    bus_id: str
    p_min: float
    p_max: float
    p_su_max: float
    p_sd_max: float
    ramp_up: float
    ramp_down: float
    min_up: int
    min_down: int
    cold_start_time: int
    cost_q: float
    cost_l: float
    cost_noload: float
    cost_startup: float
    cost_hot_startup: float
    cost_shutdown: float
    initial_status_on: bool
    initial_status_duration: int
    initial_output: float | None = None

    @property
    def p_range(self) -> float:
        return self.p_max - self.p_min

    @property
    def initial_p_above_min(self) -> float:
        """Output above minimum in the interval before the horizon starts."""
        if not self.initial_status_on:
            return 0.0
        if self.initial_output is None:
            return 0.0
        return max(0.0, self.initial_output - self.p_min)


@dataclass(frozen=True)
class Area:
    id: str
    name: str = ""


@dataclass(frozen=True)
class NetworkCase:
    horizon: int
    base_mva: float
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    generators: tuple[GeneratorParams, ...]
    areas: tuple[Area, ...]
    name: str = ""

    @cached_property
    def bus_index(self) -> dict[str, int]:
        return {b.id: k for k, b in enumerate(self.buses)}

    @cached_property
    def area_index(self) -> dict[str, int]:
        return {a.id: k for k, a in enumerate(self.areas)}

    @cached_property
    def demand(self) -> np.ndarray:
        """Demand matrix, shape (n_buses, horizon)."""
        return np.array([b.demand for b in self.buses], dtype=float).reshape(len(self.buses), self.horizon)

    def bus_area(self, bus_id: str) -> str:
        return self.buses[self.bus_index[bus_id]].area_id

    def gen_area(self, g: GeneratorParams) -> str:
        return self.bus_area(g.bus_id)

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def n_gens(self) -> int:
        return len(self.generators)

    def reference_bus(self, bus_ids: Iterable[str] | None = None) -> str:
        ids = [b.id for b in self.buses] if bus_ids is None else list(bus_ids)
        return min(ids, key=natural_key)


@dataclass(frozen=True)
class AreaView:
    """One area's slice of the network.

    ``view_buses`` lists internal buses first, then the adjacent external
    ones, each in case order; this is the angle-variable ordering used by the
    area's subproblems.
    """

    area_id: str
    internal_buses: tuple[str, ...]
    adjacent_external_buses: tuple[str, ...]
    tie_lines: tuple[str, ...]
    internal_branches: tuple[str, ...]
    generators: tuple[str, ...]
    shared_buses: tuple[str, ...] = field(default=())

    @property
    def view_buses(self) -> tuple[str, ...]:
        return self.internal_buses + self.adjacent_external_buses

    @property
    def branches(self) -> tuple[str, ...]:
        return self.internal_branches + self.tie_lines


# ---------------------------------------------------------------------------
# parsing / validation

_GEN_REQUIRED = [f.name for f in fields(GeneratorParams) if f.name != "initial_output"]


def _get(obj: dict, key: str, path: str):
    if not isinstance(obj, dict):
        raise CaseError(path, "expected an object")
    if key not in obj:
        raise CaseError(f"{path}.{key}" if path else key, "missing field")
    return obj[key]


def _num(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CaseError(path, f"expected a number, got {value!r}")
    if not np.isfinite(value):
        raise CaseError(path, "must be finite")
    return float(value)


def _int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise CaseError(path, f"expected an integer, got {value!r}")
    return int(value)


def case_from_dict(data: dict) -> NetworkCase:
    if not isinstance(data, dict):
        raise CaseError("", "case document must be a JSON object")
    horizon = _int(_get(data, "horizon", ""), "horizon")
    if horizon < 1:
        raise CaseError("horizon", "must be >= 1")
    base_mva = _num(_get(data, "base_mva", ""), "base_mva")
    if base_mva <= 0:
        raise CaseError("base_mva", "must be > 0")

    areas = []
    for k, a in enumerate(_get(data, "areas", "")):
        path = f"areas[{k}]"
        aid = a if isinstance(a, str) else str(_get(a, "id", path))
        name = "" if isinstance(a, str) else str(a.get("name", ""))
        areas.append(Area(aid, name))
    _check_unique([a.id for a in areas], "areas", "area")
    area_ids = {a.id for a in areas}

    buses = []
    for k, b in enumerate(_get(data, "buses", "")):
        path = f"buses[{k}]"
        bid = str(_get(b, "id", path))
        area_id = str(_get(b, "area_id", path))
        if area_id not in area_ids:
            raise CaseError(f"{path}.area_id", f"unknown area {area_id!r}")
        demand = _get(b, "demand", path)
        if not isinstance(demand, list) or len(demand) != horizon:
            raise CaseError(f"{path}.demand", f"expected a list of {horizon} values")
        dem = tuple(_num(d, f"{path}.demand[{t}]") for t, d in enumerate(demand))
        if any(d < 0 for d in dem):
            raise CaseError(f"{path}.demand", "demand must be >= 0")
        buses.append(Bus(bid, area_id, dem))
    _check_unique([b.id for b in buses], "buses", "bus")
    bus_ids = {b.id for b in buses}
    if not buses:
        raise CaseError("buses", "case has no buses")

    branches = []
    for k, br in enumerate(data.get("branches", [])):
        path = f"branches[{k}]"
        f_bus = str(_get(br, "from_bus", path))
        t_bus = str(_get(br, "to_bus", path))
        for key, bus in (("from_bus", f_bus), ("to_bus", t_bus)):
            if bus not in bus_ids:
                raise CaseError(f"{path}.{key}", f"unknown bus {bus!r}")
        if f_bus == t_bus:
            raise CaseError(path, f"branch connects bus {f_bus!r} to itself")
        x = _num(_get(br, "reactance", path), f"{path}.reactance")
        if x <= 0:
            raise CaseError(f"{path}.reactance", f"reactance must be > 0, got {x}")
        lim = _num(_get(br, "flow_limit", path), f"{path}.flow_limit")
        if lim <= 0:
            raise CaseError(f"{path}.flow_limit", f"flow limit must be > 0, got {lim}")
        branches.append(Branch(str(br.get("id", f"L{k + 1}")), f_bus, t_bus, x, lim))
    _check_unique([b.id for b in branches], "branches", "branch")

    gens = []
    for k, g in enumerate(data.get("generators", [])):
        path = f"generators[{k}]"
        vals = {}
        for name in _GEN_REQUIRED:
            if name == "id":
                vals["id"] = str(g.get("id", f"G{k + 1}")) if isinstance(g, dict) else None
                continue
            raw = _get(g, name, path)
            p = f"{path}.{name}"
            if name == "bus_id":
                vals[name] = str(raw)
            elif name == "initial_status_on":
                if not isinstance(raw, bool):
                    raise CaseError(p, "expected a boolean")
                vals[name] = raw
            elif name in ("min_up", "min_down", "cold_start_time", "initial_status_duration"):
                vals[name] = _int(raw, p)
            else:
                vals[name] = _num(raw, p)
        io = g.get("initial_output")
        vals["initial_output"] = None if io is None else _num(io, f"{path}.initial_output")
        gen = GeneratorParams(**vals)
        _validate_gen(gen, path, bus_ids)
        gens.append(gen)
    _check_unique([g.id for g in gens], "generators", "generator")

    case = NetworkCase(horizon, base_mva, tuple(buses), tuple(branches), tuple(gens), tuple(areas),
                       name=str(data.get("name", "")))
    _validate_topology(case)
    return case


def _check_unique(ids, path, what):
    seen = set()
    for k, i in enumerate(ids):
        if i in seen:
            raise CaseError(f"{path}[{k}].id", f"duplicate {what} id {i!r}")
        seen.add(i)


def _validate_gen(g: GeneratorParams, path: str, bus_ids: set):
    if g.bus_id not in bus_ids:
        raise CaseError(f"{path}.bus_id", f"unknown bus {g.bus_id!r}")
    if not 0 <= g.p_min <= g.p_max:
        raise CaseError(f"{path}.p_min", "requires 0 <= p_min <= p_max")
    for name in ("p_su_max", "p_sd_max"):
        if not g.p_min <= getattr(g, name) <= g.p_max:
            raise CaseError(f"{path}.{name}", "must lie in [p_min, p_max]")
    if g.ramp_up < 0 or g.ramp_down < 0:
        raise CaseError(f"{path}.ramp_up", "ramp rates must be >= 0")
    if g.min_up < 1 or g.min_down < 1:
        raise CaseError(f"{path}.min_up", "min_up and min_down must be >= 1")
    if g.cold_start_time < 0 or g.initial_status_duration < 0:
        raise CaseError(f"{path}.cold_start_time", "times must be >= 0")
    if g.cost_q < 0:
        raise CaseError(f"{path}.cost_q", "quadratic cost must be >= 0")
    if g.cost_hot_startup > g.cost_startup:
        raise CaseError(f"{path}.cost_hot_startup", "hot startup cost must not exceed cold startup cost")


def _validate_topology(case: NetworkCase):
    counts = {a.id: 0 for a in case.areas}
    for b in case.buses:
        counts[b.area_id] += 1
    for k, a in enumerate(case.areas):
        if counts[a.id] == 0:
            raise CaseError(f"areas[{k}]", f"area {a.id!r} has no buses")
    # connectivity by union-find over branches
    parent = list(range(case.n_buses))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for br in case.branches:
        i, j = find(case.bus_index[br.from_bus]), find(case.bus_index[br.to_bus])
        parent[i] = j
    roots = {find(i) for i in range(case.n_buses)}
    if len(roots) > 1:
        lonely = [b.id for k, b in enumerate(case.buses) if find(k) != find(0)]
        raise CaseError("branches", f"network is disconnected (unreachable from {case.buses[0].id!r}: {lonely})")


def load_case(source: IO | str | bytes) -> NetworkCase:
    """Parse and validate a case document (JSON text, bytes, or a readable stream)."""
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        data = json.loads(source)
    except json.JSONDecodeError as exc:
        raise CaseError("", f"parse error: {exc}") from exc
    return case_from_dict(data)


def load_case_file(path) -> NetworkCase:
    with open(path, "rb") as fh:
        return load_case(fh)


def case_to_dict(case: NetworkCase) -> dict:
    gens = []
    for g in case.generators:
        d = asdict(g)
        if d["initial_output"] is None:
            del d["initial_output"]
        gens.append(d)
    out = {
        "horizon": case.horizon,
        "base_mva": case.base_mva,
        "areas": [asdict(a) for a in case.areas],
        "buses": [{"id": b.id, "area_id": b.area_id, "demand": list(b.demand)} for b in case.buses],
        "branches": [asdict(b) for b in case.branches],
        "generators": gens,
    }
    if case.name:
        out = {"name": case.name, **out}
    return out


def dump_case(case: NetworkCase) -> str:
    return json.dumps(case_to_dict(case), indent=1)


# ---------------------------------------------------------------------------
# network matrices


def build_admittance(case: NetworkCase) -> np.ndarray:
    """DC susceptance Laplacian: B_ii = sum 1/x, B_ij = -1/x (parallel branches add)."""
    n = case.n_buses
    B = np.zeros((n, n))
    for br in case.branches:
        i, j = case.bus_index[br.from_bus], case.bus_index[br.to_bus]
        y = 1.0 / br.reactance
        B[i, j] -= y
        B[j, i] -= y
        B[i, i] += y
        B[j, j] += y
    return B


def partition_areas(case: NetworkCase) -> list[AreaView]:
    """Split the case into per-area views, in case area order."""
    shared = set()
    ties = []
    for br in case.branches:
        if case.bus_area(br.from_bus) != case.bus_area(br.to_bus):
            ties.append(br)
            shared.update((br.from_bus, br.to_bus))
    views = []
    for k, area in enumerate(case.areas):
        internal = tuple(b.id for b in case.buses if b.area_id == area.id)
        if not internal:
            raise CaseError(f"areas[{k}]", f"area {area.id!r} has no internal buses")
        inside = set(internal)
        my_ties = [br for br in ties if br.from_bus in inside or br.to_bus in inside]
        external = {br.to_bus if br.from_bus in inside else br.from_bus for br in my_ties}
        ext = tuple(b.id for b in case.buses if b.id in external)
        view_set = inside | external
        views.append(AreaView(
            area_id=area.id,
            internal_buses=internal,
            adjacent_external_buses=ext,
            tie_lines=tuple(br.id for br in my_ties),
            internal_branches=tuple(br.id for br in case.branches
                                    if br.from_bus in inside and br.to_bus in inside),
            generators=tuple(g.id for g in case.generators if g.bus_id in inside),
            shared_buses=tuple(b.id for b in case.buses if b.id in shared and b.id in view_set),
        ))
    return views


def tie_lines(case: NetworkCase) -> list[Branch]:
    return [br for br in case.branches if case.bus_area(br.from_bus) != case.bus_area(br.to_bus)]


def shared_buses(case: NetworkCase) -> list[str]:
    s = set()
    for br in tie_lines(case):
        s.update((br.from_bus, br.to_bus))
    return [b.id for b in case.buses if b.id in s]


def areas_containing(views: list[AreaView]) -> dict[str, list[str]]:
    """Map each shared bus to the areas whose view contains it."""
    out: dict[str, list[str]] = {}
    for v in views:
        for b in v.shared_buses:
            out.setdefault(b, []).append(v.area_id)
    return out


def single_area_view(case: NetworkCase) -> AreaView:
    """The whole system as one scope (no external buses, no tie-lines)."""
    return AreaView(
        area_id="*",
        internal_buses=tuple(b.id for b in case.buses),
        adjacent_external_buses=(),
        tie_lines=(),
        internal_branches=tuple(br.id for br in case.branches),
        generators=tuple(g.id for g in case.generators),
    )
