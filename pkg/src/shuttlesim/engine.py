"""Time-stepped microscopic simulation.

Each step computes every vehicle's new speed from the previous step's state
(synchronous update), then advances positions by the mean of old and new
speed. Red signals, uncleared stop/yield lines, transit stops and lane ends
act as stationary zero-length leaders, so every kind of stopping goes
through the same braking rule.

The per-step arithmetic is vectorized over all vehicles on the road. Who
follows whom (and which obstacle lies ahead) only changes on discrete
events such as section crossings, lane changes, entries, exits, signal
changes and stop clearances; that structure is rebuilt only when one of
those happens.
"""

from __future__ import annotations

import heapq
import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .behavior import (HDV, SHUTTLE, SPEED_GAIN_RATIO, DriverDraw, Follower, Leader, LaneOption, VehicleClassParams,
                       desired_speed, lane_change_decision, safe_speed, sample_driver, yield_gap_accept)
from .demand import DemandProfile, OdMatrix
from .network import Network, SegmentGroup, TransitRoute, path_ideal_time
from .routing import (AssignmentPlan, NoPathError, RouteChoiceModel, OFF_PEAK_MODEL, free_flow_costs,
                      iterate_assignment, k_shortest_paths, logit_probabilities)
from ._kernels import advance
from .units import MPH

log = logging.getLogger(__name__)

INF = math.inf

# obstacle kinds
_NONE, _SIGNAL, _STOP, _YIELD, _TRANSIT, _LANE_END = range(6)

_CLASS_CODE = {"hdv": 0, "shuttle": 1}

STOPPED = 0.1  # m/s
STOP_REACH = 2.5  # m, a transit stop is served within this distance
LINE_MARGIN = 0.1  # m, vehicles halt this far short of a stop line
LANE_CHANGE_PERIOD = 1.0  # s between lane-change evaluations
LANE_CHANGE_COOLDOWN = 3.0
ENTRY_GAP = 0.5  # m, minimum net gap for entering a section
CONFLICT_RANGE = 150.0  # m scanned on priority approaches
COST_SMOOTHING = 0.2

# slot array fields and the values held by free slots; a free slot has no
# acceleration so it stays parked at zero speed
_FLOAT_FIELDS = (("off", 0.0), ("v", 0.0), ("seclen", INF), ("Vdes", 1.0), ("A", 0.0), ("Dn", 1.0),
                 ("Dmax", 1.0), ("clr", 0.0), ("mtg", 1.0), ("tau_n", 1.0), ("tau_s", 1.0), ("tau_g", 1.0),
                 ("lshift", INF), ("dhat", 1.0), ("llen", 0.0), ("obs", INF), ("Vn2", INF), ("det_next", INF))
_INT_FIELDS = (("okind", 0), ("vid_arr", -1), ("sidx_arr", -1))
_BOOL_FIELDS = ("clamp", "is_sig", "has_obs_line", "is_transit", "active", "dwelling")


class SimulationError(RuntimeError):
    """An internal invariant was breached (e.g. two vehicles overlap)."""


@dataclass(frozen=True)
class SimConfig:
    step: float = 0.1
    duration: float = 3600.0
    warmup: float = 600.0
    seed: int = 0
    sample_interval: float = 1.0
    detector_interval: float = 300.0
    lookahead: float = 200.0
    # pull a shuttle over when at least this many vehicles queue behind it
    courtesy_queue: Optional[int] = None
    courtesy_duration: float = 15.0

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be > 0")
        if self.duration < 0 or self.warmup < 0:
            raise ValueError("duration and warmup must be >= 0")
        ratio = self.sample_interval / self.step
        if self.sample_interval <= 0 or abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("sample_interval must be a positive multiple of step")
        if not self.detector_interval > 0:
            raise ValueError("detector_interval must be > 0")

    @property
    def horizon(self) -> float:
        return self.warmup + self.duration

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.step))


class Arrival(NamedTuple):
    time: float
    origin: str
    destination: str


@dataclass(frozen=True)
class ScriptedTrip:
    """A vehicle with a prescribed departure, path and (optionally) driver."""

    vehicle_class: str
    path: Tuple[str, ...]
    depart: float
    draw: Optional[DriverDraw] = None
    stops: Tuple = ()


class VehicleState:
    __slots__ = ("id", "index", "cls", "draw", "path", "pidx", "section", "lane", "offset", "speed",
                 "depart", "entered", "chooser", "origin", "destination", "route", "stops", "stop_idx",
                 "dwell_until", "cleared", "wait_since", "committed", "red_seen", "lc_ready", "stuck_since",
                 "log", "shoulder_until", "vdes", "slot", "rank", "exited", "prev")

    def __init__(self, vid: str, index: int, cls: str, draw: DriverDraw, path: Tuple[str, ...], depart: float,
                 chooser: str = "fixed", origin: str = "", destination: str = "", route: Optional[str] = None,
                 stops: Tuple = ()):
        self.id = vid
        self.index = index
        self.cls = cls
        self.draw = draw
        self.path = path
        self.pidx = 0
        self.section = path[0]
        self.lane = 0
        self.offset = 0.0
        self.speed = 0.0
        self.depart = depart
        self.entered = None
        self.exited = None
        self.chooser = chooser  # "fixed" | "en-route" | "transit" | "scripted"
        self.origin = origin
        self.destination = destination
        self.route = route
        self.stops = stops
        self.stop_idx = 0
        self.dwell_until = None
        self.cleared = False
        self.wait_since = None
        self.committed = None
        self.red_seen = None
        self.lc_ready = 0.0
        self.stuck_since = None
        self.log: List[list] = []
        self.shoulder_until = None
        self.vdes = 0.0
        self.slot = -1
        self.rank = 0
        self.prev = None  # (section, lane) before the last crossing

    def __repr__(self):
        return f"VehicleState({self.id}, {self.section}[{self.lane}]@{self.offset:.1f}, v={self.speed:.2f})"


@dataclass
class VehicleRecord:
    id: str
    vehicle_class: str
    draw: DriverDraw
    path: Tuple[str, ...]
    depart: float
    entered: Optional[float]
    exited: Optional[float]
    section_log: List[Tuple[str, float, Optional[float]]]
    origin: str = ""
    destination: str = ""
    chooser: str = "fixed"

    @property
    def travel_time(self) -> Optional[float]:
        return None if self.exited is None else self.exited - self.depart


@dataclass
class Trajectories:
    """Column store of 1 Hz samples."""

    t: np.ndarray
    vehicle: np.ndarray  # index into ``ids``
    section: np.ndarray  # index into ``sections``
    offset: np.ndarray
    speed: np.ndarray
    ids: List[str]
    classes: List[str]
    sections: List[str]

    def __len__(self):
        return len(self.t)

    def rows(self):
        for i in range(len(self.t)):
            v = self.vehicle[i]
            yield (float(self.t[i]), self.ids[v], self.classes[v], self.sections[self.section[i]],
                   float(self.offset[i]), float(self.speed[i]))

    def for_vehicle(self, vid: str) -> "Trajectories":
        try:
            k = self.ids.index(vid)
        except ValueError:
            m = np.zeros(len(self.t), dtype=bool)
        else:
            m = self.vehicle == k
        return Trajectories(self.t[m], self.vehicle[m], self.section[m], self.offset[m], self.speed[m],
                            self.ids, self.classes, self.sections)


@dataclass(frozen=True)
class Traversal:
    vehicle_id: str
    vehicle_class: str
    group: str
    entry: float
    exit: float
    distance: float
    ideal: float

    @property
    def travel_time(self) -> float:
        return self.exit - self.entry


@dataclass
class SimOutput:
    config: SimConfig
    network: Network
    trajectories: Trajectories
    detector_counts: Dict[str, np.ndarray]
    vehicles: List[VehicleRecord]
    traversals: List[Traversal]
    injected: int = 0
    exited: int = 0
    in_network: int = 0
    queued: int = 0
    shuttle_departures: Dict[str, List[float]] = field(default_factory=dict)
    stop_events: List[Tuple[str, int, float, float]] = field(default_factory=list)
    courtesy_stops: List[Tuple[str, float, float]] = field(default_factory=list)
    min_gap: float = INF
    speed_violations: int = 0
    steps: int = 0

    @property
    def is_empty(self) -> bool:
        return not self.vehicles and len(self.trajectories) == 0

    def vehicle_totals(self) -> List[Tuple[str, str, float, float]]:
        """(id, class, travel time, delay) for vehicles that departed after
        warmup and finished before the horizon."""
        out = []
        for rec in self.vehicles:
            if rec.exited is None or rec.depart < self.config.warmup:
                continue
            ideal = path_ideal_time(self.network, rec.path, lambda lim, d=rec.draw: desired_speed(d, lim))
            tt = rec.exited - rec.depart
            out.append((rec.id, rec.vehicle_class, tt, max(tt - ideal, 0.0)))
        return out


# -- demand and dispatch --------------------------------------------------

def inject_demand(matrix: OdMatrix, rng: np.random.Generator, start: float = 0.0,
                  interval: float = 900.0) -> List[Arrival]:
    """Poisson arrivals for one demand slice: each cell's count is
    Poisson-distributed with the cell value as mean, and arrival times are
    uniform over ``[start, start + interval)``."""
    if np.any(matrix.trips < 0):
        raise ValueError("OD cells must be non-negative")
    out = []
    for o, d, q in matrix.pairs():
        n = rng.poisson(q)
        for t in np.sort(rng.uniform(start, start + interval, size=n)):
            out.append(Arrival(float(t), o, d))
    out.sort(key=lambda a: a.time)
    return out


def demand_arrivals(demand: DemandProfile, config: SimConfig, rng: np.random.Generator) -> List[Arrival]:
    """Arrivals over the whole horizon. The warmup repeats the first
    interval's rates; measured interval ``k`` starts at ``warmup + k * interval``."""
    out: List[Arrival] = []
    if demand.n_intervals == 0:
        return out
    if config.warmup > 0:
        first = demand.slice(0)
        out += inject_demand(OdMatrix(first.centroids, first.trips * config.warmup / demand.interval),
                             rng, 0.0, config.warmup)
    for k in range(demand.n_intervals):
        start = config.warmup + k * demand.interval
        if start >= config.horizon:
            break
        span = min(demand.interval, config.horizon - start)
        m = demand.slice(k)
        out += inject_demand(OdMatrix(m.centroids, m.trips * span / demand.interval), rng, start, span)
    out.sort(key=lambda a: a.time)
    return out


def dispatch_shuttles(route: Optional[TransitRoute], headway: Optional[float], horizon: float = 3600.0,
                      start: float = 0.0) -> List[float]:
    """Departure times ``start, start + H, ...`` before ``start + horizon``
    for a headway ``H`` given in minutes. No headway means no service."""
    if headway is None or route is None:
        return []
    if not headway > 0:
        raise ValueError("headway must be > 0")
    h = headway * 60.0
    n = int(math.ceil(horizon / h - 1e-9))
    return [start + k * h for k in range(n) if k * h < horizon]


# -- the world ---------------------------------------------------------------

class World:
    """Mutable state of one replication."""

    def __init__(self, config: SimConfig, network: Network, classes: Mapping[str, VehicleClassParams],
                 arrivals: Sequence[Arrival] = (), plan: Optional[AssignmentPlan] = None,
                 route_model: RouteChoiceModel = OFF_PEAK_MODEL,
                 shuttle_schedule: Sequence[Tuple[float, str]] = (), trips: Sequence[ScriptedTrip] = ()):
        self.cfg = config
        self.net = network
        self.classes = dict(classes)
        self.plan = plan
        self.route_model = route_model
        self.dt = config.step
        self.t = 0.0
        self.k = 0

        sec_ids = list(network.sections)
        self.sec_index = {s: i for i, s in enumerate(sec_ids)}
        self.sec_ids = sec_ids
        self.length = {s: sec.length for s, sec in network.sections.items()}
        self.nlanes = {s: sec.lane_count for s, sec in network.sections.items()}
        self.limit = {s: sec.speed_limit for s, sec in network.sections.items()}
        self.turn_of = {(t.from_section, t.to_section): t for t in network.turns}
        self.node_in: Dict[str, List[str]] = {}
        self.node_out: Dict[str, List[str]] = {}
        for s, sec in network.sections.items():
            self.node_in.setdefault(sec.downstream_node, []).append(s)
            self.node_out.setdefault(sec.upstream_node, []).append(s)
        self.dets = {s: sorted(network.detectors_on(s), key=lambda d: d.offset) for s in network.sections}
        self.n_bins = max(1, int(math.ceil(config.duration / config.detector_interval - 1e-9)))
        self.det_counts = {d: np.zeros(self.n_bins, dtype=np.int64) for d in network.detectors}

        self.signals = network.signals
        self.sig_state: Dict[str, Tuple[bool, ...]] = {}
        self.sig_next: Dict[str, float] = {}
        for node, plan_ in self.signals.items():
            self.sig_state[node] = tuple(plan_.is_green(i, 0.0) for i in range(len(plan_.phases)))
            self.sig_next[node] = self._next_switch(node, 0.0)

        # pending events
        self.arrivals = deque(sorted(arrivals, key=lambda a: a.time))
        self.arrival_count = 0
        self.dispatches = deque(sorted(shuttle_schedule))
        self.shuttle_count = 0
        self.trips = deque(sorted(trips, key=lambda tr: tr.depart))
        self.trip_count = 0

        self.queues: Dict[str, deque] = {}
        self.road: List[VehicleState] = []
        self.shoulder: List[VehicleState] = []
        self.lanes: Dict[Tuple[str, int], List[VehicleState]] = {}
        self.records: List[VehicleRecord] = []
        self.injected = 0
        self.exited = 0
        self.departures: Dict[str, List[float]] = {}
        self.stop_events: List[Tuple[str, int, float, float]] = []
        self.courtesy: List[Tuple[str, float, float]] = []
        self.min_gap = INF
        self.speed_violations = 0

        self.exp_cost = dict(free_flow_costs(network))
        self._path_cache: Dict[Tuple[str, str], List[Tuple[str, ...]]] = {}
        self._imprudent: Dict[int, DriverDraw] = {}

        self.samples: List[Tuple[float, np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = []
        self.vid_index: Dict[str, int] = {}
        self.vid_list: List[str] = []
        self.vid_class: List[str] = []
        self.sample_every = int(round(config.sample_interval / config.step))
        self.lc_every = max(1, int(round(LANE_CHANGE_PERIOD / config.step)))

        # per-vehicle arrays indexed by slot; slots of departed vehicles are reused
        self.cap = 0
        self.slots: List[Optional[VehicleState]] = []
        self.free: List[int] = []
        self.n = 0
        self.dirty_lanes: set = set()
        self.dirty_veh: Dict[int, VehicleState] = {}
        self._synced = True
        self.any_line = self.any_transit = self.any_clamp = False
        self.upstream = self._upstream_lanes()
        self._grow(64)
        self._buf_off = np.empty(0)
        self._buf_v = np.empty(0)

    # -- signals ---------------------------------------------------------
    def _next_switch(self, node: str, t: float) -> float:
        plan = self.signals[node]
        local = (t - plan.offset) % plan.cycle
        base = t - local
        bounds = sorted({b for ph in plan.phases for b in ph} | {0.0, plan.cycle})
        for b in bounds:
            if b > local + 1e-9:
                return base + b
        return base + plan.cycle

    def _green(self, turn) -> bool:
        return self.sig_state[self.net.sections[turn.from_section].downstream_node][turn.phase]

    # -- bookkeeping -------------------------------------------------------
    def _upstream_lanes(self) -> Dict[Tuple[str, int], List[Tuple[str, int]]]:
        """For each lane, the lanes (itself included) whose vehicles can see
        it within their lookahead."""
        la = self.cfg.lookahead
        out = {}
        for s in self.sec_ids:
            for lane in range(self.nlanes[s]):
                best = {(s, lane): -1.0}
                stack = [(s, lane, 0.0, True)]
                while stack:
                    c, cl, acc, first = stack.pop()
                    a2 = acc if first else acc + self.length[c]
                    if a2 > la:
                        continue
                    for turn in self.net.turns_into(c):
                        p = turn.from_section
                        for pl in range(self.nlanes[p]):
                            if self.net.target_lane(turn, pl) != cl:
                                continue
                            if best.get((p, pl), INF) <= a2:
                                continue
                            best[(p, pl)] = a2
                            stack.append((p, pl, a2, False))
                out[(s, lane)] = list(best)
        return out

    def _grow(self, cap: int):
        old = self.cap
        for name, default in _FLOAT_FIELDS:
            arr = np.full(cap, default)
            if old:
                arr[:old] = getattr(self, name)
            setattr(self, name, arr)
        for name, default in _INT_FIELDS:
            arr = np.full(cap, default, dtype=np.int64)
            if old:
                arr[:old] = getattr(self, name)
            setattr(self, name, arr)
        for name in _BOOL_FIELDS:
            arr = np.zeros(cap, dtype=bool)
            if old:
                arr[:old] = getattr(self, name)
            setattr(self, name, arr)
        lead = np.arange(cap, dtype=np.int64)
        if old:
            lead[:old] = self.lead
        self.lead = lead
        self.slots.extend([None] * (cap - old))
        for i in range(old, cap):
            heapq.heappush(self.free, i)
        self.cap = cap

    def _alloc(self, veh: VehicleState):
        """Put a vehicle on the road (arrays only; lanes are separate)."""
        if not self.free:
            self._grow(2 * self.cap)
        i = heapq.heappop(self.free)
        self.slots[i] = veh
        veh.slot = i
        d = veh.draw
        self.off[i] = veh.offset
        self.v[i] = veh.speed
        self.A[i] = d.max_accel
        self.Dn[i] = d.normal_decel
        self.Dmax[i] = d.max_decel
        self.clr[i] = d.clearance
        self.mtg[i] = d.min_time_gap
        self.tau_n[i] = d.reaction_normal
        self.tau_s[i] = d.reaction_at_stop
        self.tau_g[i] = d.reaction_at_signal
        self.vid_arr[i] = self.vid_index[veh.id]
        self.active[i] = True
        self.road.append(veh)
        self.n += 1
        self.dirty_veh[i] = veh

    def _release(self, veh: VehicleState):
        i = veh.slot
        for name, default in _FLOAT_FIELDS:
            getattr(self, name)[i] = default
        for name, default in _INT_FIELDS:
            getattr(self, name)[i] = default
        for name in _BOOL_FIELDS:
            getattr(self, name)[i] = False
        self.lead[i] = i
        self.slots[i] = None
        heapq.heappush(self.free, i)
        veh.slot = -1
        self.road.remove(veh)
        self.n -= 1

    def _lane_insert(self, veh: VehicleState):
        key = (veh.section, veh.lane)
        L = self.lanes.setdefault(key, [])
        pos = len(L)
        while pos > 0 and L[pos - 1].offset < veh.offset:
            pos -= 1
        L.insert(pos, veh)
        for r in range(pos, len(L)):
            L[r].rank = r
        self.dirty_lanes.add(key)

    def _lane_remove(self, veh: VehicleState):
        key = (veh.section, veh.lane)
        L = self.lanes[key]
        pos = veh.rank
        del L[pos]
        for r in range(pos, len(L)):
            L[r].rank = r
        self.dirty_lanes.add(key)

    def _touch_node(self, node: str):
        for s in self.node_in.get(node, ()):
            for lane in range(self.nlanes[s]):
                self.dirty_lanes.add((s, lane))

    def _revoke_clearance(self, node: str):
        """A signal switch changes who has priority: stop/yield vehicles that
        can still halt before their line must look for a gap again."""
        for s in self.node_in.get(node, ()):
            slen = self.length[s]
            for lane in range(self.nlanes[s]):
                L = self.lanes.get((s, lane))
                if not L or not L[0].cleared:
                    continue
                w = L[0]
                i = w.slot
                v = float(self.v[i])
                if slen - float(self.off[i]) - LINE_MARGIN >= v * v / (2.0 * float(self.Dn[i])):
                    w.cleared = False
                    self.dirty_veh[i] = w

    def _sync(self):
        if self._synced:
            return
        offs = self.off.tolist()
        vs = self.v.tolist()
        for veh in self.road:
            veh.offset = offs[veh.slot]
            veh.speed = vs[veh.slot]
        self._synced = True

    def _register(self, veh: VehicleState):
        self.vid_index[veh.id] = len(self.vid_list)
        self.vid_list.append(veh.id)
        self.vid_class.append(veh.cls)

    def _refresh(self):
        """Recompute leaders and obstacles of every vehicle whose view ahead
        may have changed since the last refresh."""
        if not (self.dirty_lanes or self.dirty_veh):
            return
        self._sync()
        while self.dirty_lanes or self.dirty_veh:
            todo = self.dirty_veh
            for key in self.dirty_lanes:
                for up in self.upstream[key]:
                    for w in self.lanes.get(up, ()):
                        todo[w.slot] = w
            self.dirty_lanes = set()
            self.dirty_veh = {}
            for i in sorted(todo):
                w = todo[i]
                if w.slot == i and self.slots[i] is w:
                    self._update(w)
        self.any_line = bool(self.has_obs_line.any())
        self.any_transit = bool(self.is_transit.any())
        self.any_clamp = bool(self.clamp.any())

    def _update(self, veh: VehicleState):
        i = veh.slot
        d = veh.draw
        s = veh.section
        L = self.length[s]
        leader, shift, obs, kind = self._scan(veh)
        if leader is not None:
            self.lead[i] = leader.slot
            self.lshift[i] = shift
            self.dhat[i] = max(d.sensitivity * leader.draw.max_decel, d.normal_decel)
            self.llen[i] = leader.draw.length
            # a leader that merged in from another approach only occupies
            # its own section; the part of its body still over the node
            # is not in our lane
            self.clamp[i] = leader.section != s and leader.prev != (s, veh.lane)
        else:
            self.lead[i] = i
            self.lshift[i] = INF
            self.dhat[i] = d.normal_decel
            self.llen[i] = 0.0
            self.clamp[i] = False
        self.obs[i] = obs
        self.okind[i] = kind
        self.is_sig[i] = kind == _SIGNAL
        self.has_obs_line[i] = (kind == _STOP or kind == _YIELD) and obs == L
        self.is_transit[i] = kind == _TRANSIT
        self.seclen[i] = L
        self.Vdes[i] = veh.vdes
        self.sidx_arr[i] = self.sec_index[s]
        nxt = INF
        for det in self.dets[s]:
            if det.offset > veh.offset:
                nxt = det.offset
                break
        self.det_next[i] = nxt
        vn2 = INF
        if veh.pidx + 1 < len(veh.path):
            vn = desired_speed(d, self.limit[veh.path[veh.pidx + 1]])
            if vn < veh.vdes:
                vn2 = vn * vn
        self.Vn2[i] = vn2

    def _scan(self, veh: VehicleState):
        """Nearest vehicle and nearest obstacle ahead along the vehicle's path.

        Returns ``(leader, shift, obstacle position, kind)``; positions are in
        the frame of the vehicle's current section, ``shift`` is the offset
        of the leader's section start in that frame.
        """
        path = veh.path
        p = veh.pidx
        s = veh.section
        lane = veh.lane
        x = veh.offset
        cum = 0.0
        horizon = self.length[s] + self.cfg.lookahead
        leader = None
        shift = 0.0
        obs = INF
        kind = _NONE
        first = True
        while True:
            slen = self.length[s]
            if leader is None:
                L = self.lanes.get((s, lane))
                if first:
                    if veh.rank > 0:
                        leader = L[veh.rank - 1]
                elif L:
                    leader = L[-1]
                    shift = cum
            if kind == _NONE and veh.stops and veh.stop_idx < len(veh.stops):
                stop = veh.stops[veh.stop_idx]
                if stop.section == s and (not first or stop.offset >= x - STOP_REACH):
                    obs, kind = cum + stop.offset, _TRANSIT
            if p + 1 >= len(path):
                break
            nxt = path[p + 1]
            turn = self.turn_of[(s, nxt)]
            if kind == _NONE:
                if first and turn.from_lane is not None and turn.from_lane != lane:
                    obs, kind = cum + slen, _LANE_END
                elif turn.control == "signal":
                    if self._green(turn):
                        if veh.red_seen == s:
                            veh.red_seen = None
                        if veh.committed == s:
                            veh.committed = None
                        if first and self._red_runner(s):
                            obs, kind = cum + slen, _SIGNAL
                    elif veh.committed != s:
                        if veh.red_seen != s:
                            dist = cum + slen - x
                            v = veh.speed
                            if v * v > 2.0 * veh.draw.normal_decel * dist:
                                veh.committed = s  # too close to stop: proceed through
                                self._touch_node(self.net.sections[s].downstream_node)
                            else:
                                veh.red_seen = s
                        if veh.red_seen == s:
                            obs, kind = cum + slen, _SIGNAL
                elif turn.control in ("stop", "yield") and not (first and veh.cleared):
                    obs, kind = cum + slen, (_STOP if turn.control == "stop" else _YIELD)
            if leader is not None and kind != _NONE:
                break
            lane = self.net.target_lane(turn, lane)
            cum += slen
            if cum > horizon:
                break
            s = nxt
            p += 1
            first = False
        return leader, shift, obs, kind

    def _red_runner(self, section: str) -> bool:
        """Whether a vehicle that committed to crossing on amber is still
        approaching the node at the end of ``section`` from another side."""
        node = self.net.sections[section].downstream_node
        for s in self.node_in.get(node, ()):
            if s == section:
                continue
            for lane in range(self.nlanes[s]):
                for w in self.lanes.get((s, lane), ()):
                    if w.committed == s:
                        return True
        return False

    # -- vehicle creation ----------------------------------------------------
    def _class(self, name: str) -> VehicleClassParams:
        if name in self.classes:
            return self.classes[name]
        return {"hdv": HDV, "shuttle": SHUTTLE}[name]

    def _candidate_paths(self, o: str, d: str) -> List[Tuple[str, ...]]:
        key = (o, d)
        if key not in self._path_cache:
            self._path_cache[key] = [p.sections for p in
                                     k_shortest_paths(self.net, o, d, self.route_model.max_paths)]
        return self._path_cache[key]

    def _choose_path(self, a: Arrival, rng: np.random.Generator) -> Tuple[Tuple[str, ...], str]:
        u = rng.random()
        options: List[Tuple[Tuple[str, ...], float]] = []
        if self.plan is not None:
            kint = int((a.time - self.cfg.warmup) // self.plan.interval) if a.time >= self.cfg.warmup else 0
            options = self.plan.paths_for(kint, a.origin, a.destination)
            fixed = self.plan.fixed_fraction
        else:
            fixed = self.route_model.fixed_fraction
        if not options:
            paths = self._candidate_paths(a.origin, a.destination)
            options = [(p, 1.0 / len(paths)) for p in paths]
        paths = [p for p, _ in options]
        if u < fixed:
            shares = np.array([s for _, s in options], dtype=float)
            shares = shares / shares.sum()
            j = int(min(np.searchsorted(np.cumsum(shares), rng.random(), side="right"), len(paths) - 1))
            return paths[j], "fixed"
        costs = [sum(self.exp_cost[s] for s in p) for p in paths]
        prob = logit_probabilities(costs, self.route_model.scale)
        j = int(min(np.searchsorted(np.cumsum(prob), rng.random(), side="right"), len(paths) - 1))
        return paths[j], "en-route"

    def _arrive(self, a: Arrival):
        idx = self.arrival_count
        self.arrival_count += 1
        rng = np.random.default_rng([self.cfg.seed, idx, 0])
        draw = sample_driver(self._class("hdv"), rng)
        try:
            path, chooser = self._choose_path(a, rng)
        except NoPathError:
            log.warning("no path %s -> %s, trip dropped", a.origin, a.destination)
            return
        veh = VehicleState(f"h{idx}", idx, "hdv", draw, path, a.time, chooser, a.origin, a.destination)
        self._enqueue(veh)

    def _dispatch(self, t: float, route_id: str):
        idx = self.shuttle_count
        self.shuttle_count += 1
        route = self.net.transit_routes[route_id]
        rng = np.random.default_rng([self.cfg.seed, idx, 1])
        draw = sample_driver(self._class("shuttle"), rng)
        veh = VehicleState(f"s{idx}", idx, "shuttle", draw, route.sections, t, "transit",
                           route.sections[0], route.sections[-1], route_id, route.stops)
        self.departures.setdefault(route_id, []).append(t)
        self._enqueue(veh)

    def _start_trip(self, trip: ScriptedTrip):
        idx = self.trip_count
        self.trip_count += 1
        code = _CLASS_CODE.get(trip.vehicle_class, 2)
        draw = trip.draw or sample_driver(self._class(trip.vehicle_class), np.random.default_rng([self.cfg.seed, idx, 2 + code]))
        veh = VehicleState(f"x{idx}", idx, trip.vehicle_class, draw, tuple(trip.path), trip.depart, "scripted",
                           trip.path[0], trip.path[-1], None, tuple(trip.stops))
        self._enqueue(veh)

    def _enqueue(self, veh: VehicleState):
        self.injected += 1
        self._register(veh)
        self.queues.setdefault(veh.path[0], deque()).append(veh)

    def _try_inject(self, sec: str, veh: VehicleState) -> bool:
        d = veh.draw
        best_lane, best_space = None, -INF
        for lane in range(self.nlanes[sec]):
            L = self.lanes.get((sec, lane))
            space = INF if not L else L[-1].offset - L[-1].draw.length
            if space > best_space + 1e-9:
                best_lane, best_space = lane, space
        if best_space < max(ENTRY_GAP, d.clearance):
            return False
        # a vehicle about to cross into this section from upstream has priority
        for p in self.net.predecessors(sec):
            for lane in range(self.nlanes[p]):
                Lp = self.lanes.get((p, lane))
                if not Lp:
                    continue
                w = Lp[0]
                if w.pidx + 1 < len(w.path) and w.path[w.pidx + 1] == sec:
                    if self.length[p] - w.offset < max(10.0, 3.0 * w.speed):
                        return False
        veh.lane = best_lane
        veh.offset = 0.0
        veh.vdes = desired_speed(d, self.limit[sec])
        L = self.lanes.setdefault((sec, best_lane), [])
        veh.rank = len(L)
        veh.speed = 0.0
        leader, shift, obs, kind = self._scan(veh)
        V = veh.vdes
        v0 = V
        tau = d.reaction_normal
        if leader is not None:
            gap = shift + leader.offset - leader.draw.length
            v0 = min(v0, safe_speed(V, Leader(gap, leader.speed, leader.draw.max_decel), d, tau))
        if kind != _NONE:
            v0 = min(v0, safe_speed(V, Leader(obs, 0.0, d.max_decel, True), d, tau))
        veh.speed = max(v0, 0.0)
        veh.entered = self.t
        veh.log.append([sec, self.t, None])
        self._alloc(veh)
        self._lane_insert(veh)
        return True

    def _inject_all(self) -> bool:
        changed = False
        self._sync()
        for sec, q in self.queues.items():
            while q:
                if self._try_inject(sec, q[0]):
                    q.popleft()
                    changed = True
                else:
                    break
        return changed

    # -- stops, yields, lane changes -------------------------------------
    def _conflict_gap(self, veh: VehicleState) -> float:
        """Time until the next priority vehicle reaches the node; 0 when the
        node is occupied or a priority vehicle could not stop for us."""
        node = self.net.sections[veh.section].downstream_node
        gap = INF
        for s in self.node_in.get(node, ()):
            if s == veh.section:
                continue
            prio = False
            for t in self.net.turns_from(s):
                if t.control == "uncontrolled" or (t.control == "signal" and self._green(t)):
                    prio = True
                    break
            slen = self.length[s]
            if not prio:
                # another minor approach already cleared to go claims the node
                for lane in range(self.nlanes[s]):
                    L = self.lanes.get((s, lane))
                    if L and L[0].cleared and slen - L[0].offset < 20.0:
                        return 0.0
                continue
            for lane in range(self.nlanes[s]):
                for w in self.lanes.get((s, lane), ()):
                    dist = slen - w.offset
                    if dist > CONFLICT_RANGE:
                        break
                    v = float(self.v[w.slot])
                    if dist < v * w.draw.reaction_normal + v * v / (2 * w.draw.normal_decel) + 10.0:
                        return 0.0
                    gap = min(gap, dist / max(v, 1.0))
        for s in self.node_out.get(node, ()):
            for lane in range(self.nlanes[s]):
                L = self.lanes.get((s, lane))
                if L and float(self.off[L[-1].slot]) < L[-1].draw.length + 3.0:
                    return 0.0
        return gap

    def _check_lines(self) -> bool:
        cand = np.flatnonzero(self.has_obs_line & (self.seclen - self.off < 20.0))
        changed = False
        if len(cand):
            self._sync()
        for i in cand.tolist():
            veh = self.slots[i]
            if veh.rank != 0:
                continue
            v = float(self.v[i])
            dist = float(self.seclen[i] - self.off[i])
            if self.okind[i] == _STOP and not (dist < 3.0 and v < STOPPED):
                continue
            if veh.wait_since is None:
                veh.wait_since = self.t
            if yield_gap_accept(self.t - veh.wait_since, veh.draw, self._conflict_gap(veh)):
                veh.cleared = True
                veh.wait_since = None
                self.dirty_veh[i] = veh
                changed = True
        return changed

    def _imprudent_draw(self, veh: VehicleState) -> DriverDraw:
        key = id(veh.draw)
        if key not in self._imprudent:
            self._imprudent[key] = replace(veh.draw, imprudent_lane_change=True)
        return self._imprudent[key]

    def _lane_neighbors(self, veh: VehicleState, lane: int):
        """Leader and follower a vehicle would have in ``lane`` of its section."""
        L = self.lanes.get((veh.section, lane), [])
        x = veh.offset
        ahead = behind = None
        for w in L:
            if w.offset > x:
                ahead = w
            else:
                behind = w
                break
        leader = None
        if ahead is not None:
            leader = Leader(ahead.offset - ahead.draw.length - x, ahead.speed, ahead.draw.max_decel)
        elif veh.pidx + 1 < len(veh.path):
            nxt = veh.path[veh.pidx + 1]
            L2 = self.lanes.get((nxt, self.net.target_lane(self.turn_of[(veh.section, nxt)], lane)))
            if L2:
                w = L2[-1]
                rear = w.offset - w.draw.length
                if w.prev != (veh.section, lane):
                    rear = max(rear, 0.0)
                leader = Leader(self.length[veh.section] - x + rear, w.speed, w.draw.max_decel)
        follower = None
        rear = x - veh.draw.length
        if behind is not None:
            follower = Follower(rear - behind.offset, behind.speed, behind.draw)
        else:
            best = None
            for p in self.net.predecessors(veh.section):
                turn = self.turn_of[(p, veh.section)]
                for pl in range(self.nlanes[p]):
                    if self.net.target_lane(turn, pl) != lane:
                        continue
                    Lp = self.lanes.get((p, pl))
                    if not Lp:
                        continue
                    w = Lp[0]
                    if w.pidx + 1 < len(w.path) and w.path[w.pidx + 1] == veh.section:
                        g = rear + self.length[p] - w.offset
                        # several approaches may feed the lane: keep the one
                        # that would need the hardest braking
                        need = w.speed * w.draw.reaction_normal + w.speed ** 2 / (2 * w.draw.normal_decel) - g
                        if best is None or need > best[0]:
                            best = (need, Follower(g, w.speed, w.draw))
            follower = None if best is None else best[1]
        return leader, follower

    def _achievable(self, veh: VehicleState, leader: Optional[Leader]) -> float:
        if leader is None or leader.gap > 100.0:
            return veh.vdes
        return min(veh.vdes, leader.speed)

    def _current_achievable(self, veh: VehicleState) -> float:
        i = veh.slot
        j = int(self.lead[i])
        if j == i:
            return veh.vdes
        gap = float(self.off[j] - self.llen[i] + self.lshift[i] - self.off[i])
        return self._achievable(veh, Leader(gap, float(self.v[j]), 0.0))

    def _lane_changes(self) -> bool:
        self._sync()
        changed = False
        t = self.t
        for veh in self.road:
            s = veh.section
            if self.nlanes[s] < 2 or veh.lc_ready > t or veh.dwell_until is not None:
                continue
            lane = veh.lane
            need = None
            if veh.pidx + 1 < len(veh.path):
                turn = self.turn_of[(s, veh.path[veh.pidx + 1])]
                if turn.from_lane is not None and turn.from_lane != lane:
                    need = turn.from_lane
            draw = veh.draw
            if need is not None:
                tl = lane + (1 if need > lane else -1)
                leader, follower = self._lane_neighbors(veh, tl)
                stuck = (veh.speed < STOPPED and self.length[s] - veh.offset < 10.0)
                if stuck:
                    if veh.stuck_since is None:
                        veh.stuck_since = t
                    if t - veh.stuck_since >= 3.0:
                        draw = self._imprudent_draw(veh)
                else:
                    veh.stuck_since = None
                opt = LaneOption(leader, follower, self._achievable(veh, leader))
                ok = lane_change_decision(veh.speed, draw, veh.speed, opt, "turn")
            elif veh.cls == "shuttle":
                continue
            else:
                cur = self._current_achievable(veh)
                ok = False
                tl = lane + 1
                if tl < self.nlanes[s] and cur < SPEED_GAIN_RATIO * veh.vdes:
                    leader, follower = self._lane_neighbors(veh, tl)
                    opt = LaneOption(leader, follower, self._achievable(veh, leader))
                    ok = lane_change_decision(veh.speed, draw, cur, opt, "speed-gain")
                if not ok and lane > 0:
                    tl = lane - 1
                    leader, follower = self._lane_neighbors(veh, tl)
                    opt = LaneOption(leader, follower, self._achievable(veh, leader))
                    ok = lane_change_decision(veh.speed, draw, cur, opt, "keep-right")
            if ok:
                self._lane_remove(veh)
                veh.lane = tl
                self._lane_insert(veh)
                veh.lc_ready = t + LANE_CHANGE_COOLDOWN
                veh.stuck_since = None
                changed = True
        return changed

    def _courtesy(self) -> bool:
        """Pull shuttles over when a long queue trails them."""
        changed = False
        n_min = self.cfg.courtesy_queue
        self._sync()
        for veh in list(self.road):
            if veh.cls != "shuttle" or veh.dwell_until is not None:
                continue
            L = self.lanes.get((veh.section, veh.lane), [])
            behind = L[veh.rank + 1:]
            chain, prev = 0, veh
            for w in behind:
                if prev.offset - prev.draw.length - w.offset > 30.0:
                    break
                chain += 1
                prev = w
            if chain >= n_min:
                veh.shoulder_until = self.t + self.cfg.courtesy_duration
                self._lane_remove(veh)
                self._release(veh)
                veh.speed = 0.0
                self.shoulder.append(veh)
                self.courtesy.append((veh.id, self.t, INF))
                changed = True
        return changed

    def _rejoin(self) -> bool:
        changed = False
        self._sync()
        for veh in list(self.shoulder):
            if self.t < veh.shoulder_until:
                continue
            L = self.lanes.get((veh.section, veh.lane), [])
            ok = True
            for w in L:
                if w.offset > veh.offset:
                    if w.offset - w.draw.length - veh.offset < veh.draw.clearance:
                        ok = False
                        break
                else:
                    if veh.offset - veh.draw.length - w.offset < max(10.0, 3.0 * w.speed):
                        ok = False
                    break
            if not ok:
                continue
            self.shoulder.remove(veh)
            self._alloc(veh)
            self._lane_insert(veh)
            for j, (vid, t0, t1) in enumerate(self.courtesy):
                if vid == veh.id and t1 == INF:
                    self.courtesy[j] = (vid, t0, self.t)
            veh.shoulder_until = None
            changed = True
        return changed

    # -- section transitions ---------------------------------------------------
    def _count_detector(self, det_id: str, t: float):
        if t < self.cfg.warmup:
            return
        b = int((t - self.cfg.warmup) // self.cfg.detector_interval)
        if b < self.n_bins:
            self.det_counts[det_id][b] += 1

    def _cross(self, veh: VehicleState, old_off: float, t0: float) -> bool:
        """Move a vehicle whose front passed its section end. Returns True if
        it left the network."""
        dt = self.dt
        span = veh.offset - old_off
        self._lane_remove(veh)
        while veh.offset >= self.length[veh.section]:
            s = veh.section
            L = self.length[s]
            tc = t0 + dt * ((L - old_off) / span if span > 0 else 1.0)
            entry = veh.log[-1]
            entry[2] = tc
            self.exp_cost[s] = (1 - COST_SMOOTHING) * self.exp_cost[s] + COST_SMOOTHING * (tc - entry[1])
            if veh.pidx + 1 >= len(veh.path):
                self._exit(veh, tc)
                return True
            nxt = veh.path[veh.pidx + 1]
            turn = self.turn_of[(s, nxt)]
            veh.prev = (s, veh.lane)
            veh.lane = self.net.target_lane(turn, veh.lane)
            veh.offset -= L
            old_off -= L
            veh.pidx += 1
            veh.section = nxt
            veh.cleared = False
            veh.wait_since = None
            if veh.committed == s:
                self._touch_node(self.net.sections[s].downstream_node)
            veh.committed = None
            veh.red_seen = None
            veh.stuck_since = None
            veh.vdes = desired_speed(veh.draw, self.limit[nxt])
            if veh.speed > veh.vdes:
                veh.speed = veh.vdes
            veh.log.append([nxt, tc, None])
            for d in self.dets[nxt]:
                if d.offset <= veh.offset:
                    tcd = t0 + dt * ((d.offset - old_off) / span if span > 0 else 1.0)
                    self._count_detector(d.id, tcd)
        self._lane_insert(veh)
        self.off[veh.slot] = veh.offset
        self.v[veh.slot] = veh.speed
        return False

    def _exit(self, veh: VehicleState, t: float):
        veh.exited = t
        self.exited += 1
        self._release(veh)
        self._record(veh)

    def _record(self, veh: VehicleState):
        self.records.append(VehicleRecord(veh.id, veh.cls, veh.draw, veh.path, veh.depart, veh.entered,
                                          veh.exited, [tuple(e) for e in veh.log], veh.origin,
                                          veh.destination, veh.chooser))

    # -- the step ----------------------------------------------------------
    def step(self):
        cfg = self.cfg
        dt = self.dt
        t0 = self.t
        t1 = (self.k + 1) * dt

        while self.arrivals and self.arrivals[0].time <= t0:
            self._arrive(self.arrivals.popleft())
        while self.dispatches and self.dispatches[0][0] <= t0 + 1e-9:
            td, rid = self.dispatches.popleft()
            self._dispatch(td, rid)
        while self.trips and self.trips[0].depart <= t0 + 1e-9:
            self._start_trip(self.trips.popleft())

        for node, tn in self.sig_next.items():
            if t0 >= tn - 1e-9:
                plan = self.signals[node]
                self.sig_state[node] = tuple(plan.is_green(i, t0 + 1e-9) for i in range(len(plan.phases)))
                self.sig_next[node] = self._next_switch(node, t0 + 1e-9)
                self._touch_node(node)
                self._revoke_clearance(node)

        if self.any_transit:
            for veh in self.road:
                if veh.dwell_until is not None and t0 >= veh.dwell_until - 1e-9:
                    veh.dwell_until = None
                    veh.stop_idx += 1
                    self.dwelling[veh.slot] = False
                    self.dirty_veh[veh.slot] = veh
        if self.shoulder:
            self._rejoin()
        if self.queues and any(self.queues.values()):
            self._inject_all()
        if self.n and self.k % self.lc_every == 0:
            self._lane_changes()
            if cfg.courtesy_queue is not None:
                self._courtesy()
        self._refresh()
        if self.any_line and self._check_lines():
            self._refresh()

        if self.n:
            self._move(t0)
            self._refresh()

        self.t = t1
        self.k += 1
        if self.sample_every and self.k % self.sample_every == 0 and self.t >= cfg.warmup - 1e-9 and self.n:
            self._sample()
        self._check_conservation()

    def _move(self, t0: float):
        dt = self.dt
        old_off = self.off
        if self._buf_off.shape[0] != self.cap:
            self._buf_off = np.empty(self.cap)
            self._buf_v = np.empty(self.cap)
        new_off, new = self._buf_off, self._buf_v
        gmin, imin, nviol = advance(dt, STOPPED, LINE_MARGIN, self.active, old_off, self.v, self.lead, self.llen, self.lshift,
                                    self.clamp, self.clr, self.Vdes, self.A, self.Dn, self.Dmax, self.mtg,
                                    self.tau_n, self.tau_s, self.tau_g, self.is_sig, self.obs, self.dhat,
                                    self.Vn2, self.seclen, self.dwelling, new, new_off)
        if gmin < self.min_gap:
            self.min_gap = gmin
        if gmin < -1e-6:
            a, b = self.slots[imin], self.slots[int(self.lead[imin])]
            raise SimulationError(f"t={t0:.1f}: vehicle {a.id} overlaps leader {b.id} by {-gmin:.3f} m "
                                  f"(sections {a.section}/{b.section}, lane {a.lane})")
        self.speed_violations += nviol
        self._buf_off, self._buf_v = old_off, self.v
        self.off = new_off
        self.v = new
        self._synced = False

        hit = new_off >= self.det_next
        if hit.any():
            for i in np.flatnonzero(hit).tolist():
                veh = self.slots[i]
                x0, x1 = float(old_off[i]), float(new_off[i])
                for d in self.dets[veh.section]:
                    if x0 < d.offset <= x1:
                        self._count_detector(d.id, t0 + dt * (d.offset - x0) / (x1 - x0))
                nxt = INF
                for d in self.dets[veh.section]:
                    if d.offset > x1:
                        nxt = d.offset
                        break
                self.det_next[i] = nxt

        if self.any_transit:
            near = np.flatnonzero(self.is_transit & (self.obs - new_off < STOP_REACH) & (new < STOPPED)
                                  & ~self.dwelling)
            for i in near.tolist():
                veh = self.slots[i]
                stop = veh.stops[veh.stop_idx]
                veh.dwell_until = t0 + dt + stop.dwell
                self.dwelling[i] = True
                self.stop_events.append((veh.id, veh.stop_idx, t0 + dt, t0 + dt + stop.dwell))

        over = new_off >= self.seclen
        if over.any():
            self._sync()
            crossing = [(self.slots[i], float(old_off[i])) for i in np.flatnonzero(over).tolist()]
            for veh, x0 in crossing:
                self._cross(veh, x0, t0)

    def _sample(self):
        act = np.flatnonzero(self.active)
        self.samples.append((self.t, self.vid_arr[act], self.sidx_arr[act], self.off[act], self.v[act]))

    def _check_conservation(self):
        queued = sum(len(q) for q in self.queues.values())
        on = len(self.road) + len(self.shoulder)
        if self.injected != self.exited + on + queued:
            raise SimulationError(f"t={self.t:.1f}: conservation broken: injected {self.injected} != "
                                  f"exited {self.exited} + in network {on} + queued {queued}")

    # -- results -------------------------------------------------------------
    def output(self) -> SimOutput:
        self._sync()
        for veh in self.road + self.shoulder:
            self._record(veh)
        for q in self.queues.values():
            for veh in q:
                self._record(veh)
        if self.samples:
            t = np.concatenate([np.full(len(s[1]), s[0]) for s in self.samples])
            traj = Trajectories(np.round(t, 6), np.concatenate([s[1] for s in self.samples]),
                                np.concatenate([s[2] for s in self.samples]),
                                np.concatenate([s[3] for s in self.samples]),
                                np.concatenate([s[4] for s in self.samples]),
                                list(self.vid_list), list(self.vid_class), list(self.sec_ids))
        else:
            e = np.zeros(0)
            traj = Trajectories(e, e.astype(np.int64), e.astype(np.int64), e, e, list(self.vid_list),
                                list(self.vid_class), list(self.sec_ids))
        courtesy = [(vid, a, b if b != INF else self.t) for vid, a, b in self.courtesy]
        out = SimOutput(self.cfg, self.net, traj, self.det_counts, self.records, [],
                        injected=self.injected, exited=self.exited, in_network=len(self.road) + len(self.shoulder),
                        queued=sum(len(q) for q in self.queues.values()), shuttle_departures=dict(self.departures),
                        stop_events=list(self.stop_events), courtesy_stops=courtesy, min_gap=self.min_gap,
                        speed_violations=self.speed_violations, steps=self.k)
        out.traversals = extract_traversals(out)
        return out


def step(world: World) -> World:
    """Advance the world by one time step."""
    world.step()
    return world


def shuttle_schedule(network: Network, scenario, config: SimConfig) -> List[Tuple[float, str]]:
    if scenario is None or getattr(scenario, "headway", None) is None:
        return []
    routes = getattr(scenario, "routes", None) or tuple(network.transit_routes)
    out = []
    for rid in routes:
        for t in dispatch_shuttles(network.transit_routes[rid], scenario.headway, config.duration, config.warmup):
            out.append((t, rid))
    return sorted(out)


def run(config: SimConfig, network: Network, demand: Optional[DemandProfile] = None, scenario=None,
        classes: Optional[Mapping[str, VehicleClassParams]] = None, plan: Optional[AssignmentPlan] = None,
        route_model: RouteChoiceModel = OFF_PEAK_MODEL, trips: Sequence[ScriptedTrip] = ()) -> SimOutput:
    """Simulate one replication.

    ``scenario`` supplies the shuttle service: ``headway`` in minutes (None
    for no service), ``shuttle_speed`` in mph (None keeps the class cap) and
    optionally ``routes``. Shuttles depart at ``warmup + k * headway``.
    """
    classes = dict(classes or {"hdv": HDV, "shuttle": SHUTTLE})
    speed = getattr(scenario, "shuttle_speed", None) if scenario is not None else None
    if speed is not None:
        classes["shuttle"] = classes.get("shuttle", SHUTTLE).with_speed(speed * MPH)
    arrivals: List[Arrival] = []
    if demand is not None and demand.total() > 0:
        arrivals = demand_arrivals(demand, config, np.random.default_rng([config.seed, 0xD0]))
        if plan is None:
            plan = iterate_assignment(network, demand, route_model)
    world = World(config, network, classes, arrivals, plan, route_model,
                  shuttle_schedule(network, scenario, config), trips)
    for _ in range(config.n_steps):
        world.step()
    return world.output()


def extract_traversals(output: SimOutput, groups: Optional[Sequence[SegmentGroup]] = None) -> List[Traversal]:
    """One record per vehicle per completed traversal of a segment group that
    lies entirely inside the measured period."""
    net = output.network
    if groups is None:
        groups = list(net.segment_groups.values())
    lo, hi = output.config.warmup, output.config.horizon
    out = []
    for g in groups:
        secs = g.sections
        m = len(secs)
        dist = net.path_length(secs)
        for rec in output.vehicles:
            lg = rec.section_log
            for i in range(len(lg) - m + 1):
                if lg[i][0] != secs[0]:
                    continue
                if any(lg[i + j][0] != secs[j] for j in range(m)):
                    continue
                t_in, t_out = lg[i][1], lg[i + m - 1][2]
                if t_out is None or t_in < lo - 1e-9 or t_out > hi + 1e-9:
                    continue
                ideal = path_ideal_time(net, secs, lambda lim, d=rec.draw: desired_speed(d, lim))
                out.append(Traversal(rec.id, rec.vehicle_class, g.name, t_in, t_out, dist, ideal))
    return out
