"""Road network: sections, turns, fixed-time signals, detectors, centroids,
transit routes and the segment groups used for impact reporting.

The network is immutable after loading and may be shared read-only between
simulation replications.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .units import length_factor, speed_factor

CONTROLS = ("uncontrolled", "stop", "yield", "signal")


class NetworkError(ValueError):
    """Raised for schema violations and dangling references in a network."""


@dataclass(frozen=True)
class Section:
    id: str
    length: float
    lane_count: int
    speed_limit: float
    upstream_node: str
    downstream_node: str

    def __post_init__(self):
        if not self.length > 0:
            raise NetworkError(f"section {self.id}: length must be > 0")
        if self.lane_count < 1:
            raise NetworkError(f"section {self.id}: lane_count must be >= 1")
        if not self.speed_limit > 0:
            raise NetworkError(f"section {self.id}: speed_limit must be > 0")


@dataclass(frozen=True)
class Turn:
    from_section: str
    to_section: str
    control: str = "uncontrolled"
    phase: Optional[int] = None
    # None means any lane (from) / same lane index clipped to the target (to)
    from_lane: Optional[int] = None
    to_lane: Optional[int] = None
    transit_only: bool = False

    def __post_init__(self):
        if self.control not in CONTROLS:
            raise NetworkError(f"turn {self.from_section}->{self.to_section}: bad control {self.control!r}")
        if self.control == "signal" and self.phase is None:
            raise NetworkError(f"turn {self.from_section}->{self.to_section}: signal control needs a phase")

    def allows_lane(self, lane: int) -> bool:
        return self.from_lane is None or self.from_lane == lane


@dataclass(frozen=True)
class SignalPlan:
    """Fixed-time plan; ``phases`` are half-open green intervals [start, end)
    in cycle seconds. ``start > end`` wraps around the cycle boundary."""

    node: str
    cycle: float
    phases: Tuple[Tuple[float, float], ...]
    offset: float = 0.0

    def __post_init__(self):
        if not self.cycle > 0:
            raise NetworkError(f"signal {self.node}: cycle must be > 0")
        for start, end in self.phases:
            if not (0 <= start < self.cycle and 0 <= end <= self.cycle):
                raise NetworkError(f"signal {self.node}: phase interval ({start}, {end}) outside [0, cycle)")

    def is_green(self, phase: int, t: float) -> bool:
        start, end = self.phases[phase]
        local = (t - self.offset) % self.cycle
        if start <= end:
            return start <= local < end
        return local >= start or local < end


def signal_state(plan: SignalPlan, t: float) -> Dict[int, str]:
    """Per-phase state (``"green"`` or ``"red"``) of a fixed-time plan at time ``t``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return {i: ("green" if plan.is_green(i, t) else "red") for i in range(len(plan.phases))}


@dataclass(frozen=True)
class Detector:
    id: str
    section: str
    offset: float
    aggregation: float = 300.0


@dataclass(frozen=True)
class Centroid:
    id: str
    kind: str  # "internal" | "external"
    connectors: Tuple[Tuple[str, str], ...]  # (section id, "in" | "out")

    @property
    def origins(self) -> List[str]:
        return [s for s, d in self.connectors if d == "out"]

    @property
    def destinations(self) -> List[str]:
        return [s for s, d in self.connectors if d == "in"]


@dataclass(frozen=True)
class TransitStop:
    section: str
    offset: float
    dwell: float = 20.0


@dataclass(frozen=True)
class TransitRoute:
    id: str
    sections: Tuple[str, ...]
    stops: Tuple[TransitStop, ...] = ()


@dataclass(frozen=True)
class SegmentGroup:
    name: str
    sections: Tuple[str, ...]


@dataclass
class Network:
    sections: Dict[str, Section]
    turns: List[Turn]
    signals: Dict[str, SignalPlan] = field(default_factory=dict)
    detectors: Dict[str, Detector] = field(default_factory=dict)
    centroids: Dict[str, Centroid] = field(default_factory=dict)
    transit_routes: Dict[str, TransitRoute] = field(default_factory=dict)
    segment_groups: Dict[str, SegmentGroup] = field(default_factory=dict)
    nodes: Tuple[str, ...] = ()

    def __post_init__(self):
        self._turns_from: Dict[str, List[Turn]] = {s: [] for s in self.sections}
        self._turns_into: Dict[str, List[Turn]] = {s: [] for s in self.sections}
        self._turn: Dict[Tuple[str, str], Turn] = {}
        for t in self.turns:
            if t.from_section in self._turns_from:
                self._turns_from[t.from_section].append(t)
            if t.to_section in self._turns_into:
                self._turns_into[t.to_section].append(t)
            self._turn[(t.from_section, t.to_section)] = t
        self._detectors_on: Dict[str, List[Detector]] = {}
        for d in self.detectors.values():
            self._detectors_on.setdefault(d.section, []).append(d)
        self.validate()

    # -- queries -----------------------------------------------------------
    def turns_from(self, section: str) -> List[Turn]:
        return self._turns_from[section]

    def successors(self, section: str) -> List[str]:
        return [t.to_section for t in self._turns_from[section]]

    def predecessors(self, section: str) -> List[str]:
        return [t.from_section for t in self._turns_into[section]]

    def turn(self, from_section: str, to_section: str) -> Optional[Turn]:
        return self._turn.get((from_section, to_section))

    def turns_into(self, section: str) -> List[Turn]:
        return self._turns_into[section]

    def turns_at_node(self, node: str) -> List[Turn]:
        return [t for t in self.turns if self.sections[t.from_section].downstream_node == node]

    def detectors_on(self, section: str) -> List[Detector]:
        return self._detectors_on.get(section, [])

    def route_length(self, route_id: str) -> float:
        return sum(self.sections[s].length for s in self.transit_routes[route_id].sections)

    def path_length(self, sections: Iterable[str]) -> float:
        return sum(self.sections[s].length for s in sections)

    def is_connected_path(self, sections: Sequence[str]) -> bool:
        return all((a, b) in self._turn for a, b in zip(sections, sections[1:]))

    def target_lane(self, turn: Turn, lane: int) -> int:
        if turn.to_lane is not None:
            return turn.to_lane
        return min(lane, self.sections[turn.to_section].lane_count - 1)

    # -- validation --------------------------------------------------------
    def validate(self) -> None:
        secs = self.sections
        for t in self.turns:
            for end in (t.from_section, t.to_section):
                if end not in secs:
                    raise NetworkError(f"turn {t.from_section}->{t.to_section}: unknown section {end}")
            a, b = secs[t.from_section], secs[t.to_section]
            if a.downstream_node != b.upstream_node:
                raise NetworkError(f"turn {a.id}->{b.id}: sections do not share a node")
            if t.from_lane is not None and not 0 <= t.from_lane < a.lane_count:
                raise NetworkError(f"turn {a.id}->{b.id}: from_lane out of range")
            if t.to_lane is not None and not 0 <= t.to_lane < b.lane_count:
                raise NetworkError(f"turn {a.id}->{b.id}: to_lane out of range")
            if t.control == "signal":
                plan = self.signals.get(a.downstream_node)
                if plan is None or not 0 <= t.phase < len(plan.phases):
                    raise NetworkError(f"turn {a.id}->{b.id}: references missing phase {t.phase} at node {a.downstream_node}")
        for d in self.detectors.values():
            if d.section not in secs:
                raise NetworkError(f"detector {d.id}: unknown section {d.section}")
            if not 0 <= d.offset <= secs[d.section].length:
                raise NetworkError(f"detector {d.id}: offset outside section")
            if not d.aggregation > 0:
                raise NetworkError(f"detector {d.id}: aggregation must be > 0")
        for c in self.centroids.values():
            if c.kind not in ("internal", "external"):
                raise NetworkError(f"centroid {c.id}: kind must be internal or external")
            for s, direction in c.connectors:
                if s not in secs:
                    raise NetworkError(f"centroid {c.id}: unknown connector section {s}")
                if direction not in ("in", "out"):
                    raise NetworkError(f"centroid {c.id}: connector direction must be in/out")
        for r in self.transit_routes.values():
            for s in r.sections:
                if s not in secs:
                    raise NetworkError(f"transit route {r.id}: unknown section {s}")
            if not self.is_connected_path(r.sections):
                raise NetworkError(f"transit route {r.id}: route not connected")
            for stop in r.stops:
                if stop.section not in r.sections:
                    raise NetworkError(f"transit route {r.id}: stop on section {stop.section} not on route")
                if not 0 <= stop.offset <= secs[stop.section].length:
                    raise NetworkError(f"transit route {r.id}: stop offset outside section {stop.section}")
        for g in self.segment_groups.values():
            for s in g.sections:
                if s not in secs:
                    raise NetworkError(f"segment group {g.name}: unknown section {s}")
            if not self.is_connected_path(g.sections):
                raise NetworkError(f"segment group {g.name}: sections are not a connected path")

    # -- serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        """Plain-JSON form in SI units, readable by :func:`load_network`."""
        nodes = sorted({s.upstream_node for s in self.sections.values()}
                       | {s.downstream_node for s in self.sections.values()} | set(self.nodes))
        return {
            "units": {"length": "m", "speed": "mps"},
            "nodes": [{"id": n} for n in nodes],
            "sections": [
                {"id": s.id, "from": s.upstream_node, "to": s.downstream_node, "length": s.length,
                 "lanes": s.lane_count, "speed_limit": s.speed_limit}
                for s in self.sections.values()
            ],
            "turns": [
                {k: v for k, v in (("from", t.from_section), ("to", t.to_section), ("control", t.control),
                                   ("phase", t.phase), ("from_lane", t.from_lane), ("to_lane", t.to_lane),
                                   ("transit_only", t.transit_only or None))
                 if v is not None}
                for t in self.turns
            ],
            "signals": [
                {"node": p.node, "cycle": p.cycle, "offset": p.offset, "phases": [list(ph) for ph in p.phases]}
                for p in self.signals.values()
            ],
            "detectors": [
                {"id": d.id, "section": d.section, "offset": d.offset, "aggregation": d.aggregation}
                for d in self.detectors.values()
            ],
            "centroids": [
                {"id": c.id, "kind": c.kind,
                 "connectors": [{"section": s, "direction": d} for s, d in c.connectors]}
                for c in self.centroids.values()
            ],
            "transit_routes": [
                {"id": r.id, "sections": list(r.sections),
                 "stops": [{"section": st.section, "offset": st.offset, "dwell": st.dwell} for st in r.stops]}
                for r in self.transit_routes.values()
            ],
            "segment_groups": [{"name": g.name, "sections": list(g.sections)} for g in self.segment_groups.values()],
        }


def _require(obj: Mapping, key: str, where: str):
    if key not in obj:
        raise NetworkError(f"{where}: missing field {key!r}")
    return obj[key]


def network_from_dict(doc: Mapping) -> Network:
    units = doc.get("units", {})
    lf = length_factor(units.get("length", "m"))
    sf = speed_factor(units.get("speed", "mps"))
    for key in ("sections", "turns"):
        if key not in doc:
            raise NetworkError(f"network: missing top-level array {key!r}")

    sections: Dict[str, Section] = {}
    for raw in doc["sections"]:
        sid = str(_require(raw, "id", "section"))
        if sid in sections:
            raise NetworkError(f"section {sid}: duplicate id")
        sections[sid] = Section(
            id=sid,
            length=float(_require(raw, "length", f"section {sid}")) * lf,
            lane_count=int(raw.get("lanes", 1)),
            speed_limit=float(_require(raw, "speed_limit", f"section {sid}")) * sf,
            upstream_node=str(_require(raw, "from", f"section {sid}")),
            downstream_node=str(_require(raw, "to", f"section {sid}")),
        )
    declared_nodes = tuple(str(n["id"]) for n in doc.get("nodes", []))
    if declared_nodes:
        known = set(declared_nodes)
        for s in sections.values():
            for n in (s.upstream_node, s.downstream_node):
                if n not in known:
                    raise NetworkError(f"section {s.id}: unknown node {n}")

    turns = []
    for raw in doc["turns"]:
        turns.append(Turn(
            from_section=str(_require(raw, "from", "turn")),
            to_section=str(_require(raw, "to", "turn")),
            control=raw.get("control", "uncontrolled"),
            phase=raw.get("phase"),
            from_lane=raw.get("from_lane"),
            to_lane=raw.get("to_lane"),
            transit_only=bool(raw.get("transit_only", False)),
        ))
    signals = {}
    for raw in doc.get("signals", []):
        node = str(_require(raw, "node", "signal"))
        signals[node] = SignalPlan(
            node=node, cycle=float(_require(raw, "cycle", f"signal {node}")),
            phases=tuple((float(a), float(b)) for a, b in _require(raw, "phases", f"signal {node}")),
            offset=float(raw.get("offset", 0.0)),
        )
    detectors = {}
    for raw in doc.get("detectors", []):
        did = str(_require(raw, "id", "detector"))
        detectors[did] = Detector(did, str(_require(raw, "section", f"detector {did}")),
                                  float(_require(raw, "offset", f"detector {did}")) * lf,
                                  float(raw.get("aggregation", 300.0)))
    centroids = {}
    for raw in doc.get("centroids", []):
        cid = str(_require(raw, "id", "centroid"))
        conns = tuple((str(c["section"]), str(c["direction"])) for c in raw.get("connectors", []))
        centroids[cid] = Centroid(cid, raw.get("kind", "internal"), conns)
    routes = {}
    for raw in doc.get("transit_routes", []):
        rid = str(_require(raw, "id", "transit route"))
        stops = tuple(TransitStop(str(s["section"]), float(s["offset"]) * lf, float(s.get("dwell", 20.0)))
                      for s in raw.get("stops", []))
        routes[rid] = TransitRoute(rid, tuple(str(s) for s in _require(raw, "sections", f"transit route {rid}")), stops)
    groups = {}
    for raw in doc.get("segment_groups", []):
        name = str(_require(raw, "name", "segment group"))
        groups[name] = SegmentGroup(name, tuple(str(s) for s in _require(raw, "sections", f"segment group {name}")))
    return Network(sections, turns, signals, detectors, centroids, routes, groups, declared_nodes)


def load_network(path: Union[str, Path]) -> Network:
    """Load and validate a network file (JSON)."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise NetworkError(f"{path}: not valid JSON ({exc})") from exc
    return network_from_dict(doc)


def save_network(network: Network, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(network.to_dict(), indent=1))


def path_ideal_time(network: Network, group: Union[SegmentGroup, Sequence[str]],
                    speed_fn: Optional[Callable[[float], float]] = None) -> float:
    """Free-flow time over a group of sections.

    ``speed_fn`` maps a section speed limit to the speed actually targeted
    (e.g. a shuttle cap); the default is the limit itself.
    """
    sections = group.sections if isinstance(group, SegmentGroup) else group
    total = 0.0
    for sid in sections:
        sec = network.sections[sid]
        v = sec.speed_limit if speed_fn is None else speed_fn(sec.speed_limit)
        if not v > 0 or math.isinf(sec.length):
            raise ValueError(f"non-positive target speed on section {sid}")
        total += sec.length / v
    return total
