"""Vehicle-parameter calibration from trajectories, validation scores, GEH
detector scoring and bounded OD adjustment.

Travel times are measured the same way for field logs and for simulated
vehicles: 1 Hz samples of (section, offset) are turned into distance along
the driven path, and segment entry and exit times are interpolated linearly
between samples.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .behavior import HDV, SHUTTLE, ParamDist, VehicleClassParams, sample_driver
from .demand import OdMatrix
from .engine import ScriptedTrip, SimConfig, SimOutput, run
from .network import Network, TransitStop, path_ideal_time
from .routing import OFF_PEAK_MODEL, RouteChoiceModel, path_set

log = logging.getLogger(__name__)

CONDITIONS = ("free", "following-shuttle", "shuttle")
_CONDITION_CLASS = {"free": "hdv", "following-shuttle": "hdv", "shuttle": "shuttle"}
CALIBRATION_CONDITION = {"hdv": "free", "shuttle": "shuttle"}

# plausible physical range of every calibratable parameter (SI units)
PARAM_BOUNDS: Dict[str, Tuple[float, float]] = {
    "max_speed": (1.0, 45.0),
    "speed_acceptance": (0.5, 1.5),
    "clearance": (0.0, 10.0),
    "yield_time": (0.0, 60.0),
    "reaction_normal": (0.1, 3.0),
    "reaction_at_stop": (0.1, 3.0),
    "reaction_at_signal": (0.1, 3.0),
    "max_accel": (0.3, 8.0),
    "normal_decel": (0.3, 8.0),
    "max_decel": (0.5, 12.0),
    "sensitivity": (0.0, 2.0),
    "min_time_gap": (0.0, 10.0),
}

FOLLOW_HEADWAY = 3.0  # s between the shuttle and the following car at departure


class CalibrationError(ValueError):
    pass


# -- trajectories -------------------------------------------------------------

@dataclass
class TrajectoryLog:
    """One trip sampled at 1 Hz in section coordinates. The first and last
    samples may be closer than 1 s to their neighbours when they mark the
    exact trip start and end.

    ``path`` is the section sequence driven; ``excluded`` lists flagged time
    intervals (e.g. unscheduled stops) left out of travel times.
    """

    vehicle_class: str
    route: str
    condition: str
    path: Tuple[str, ...]
    t: np.ndarray
    section: Tuple[str, ...]
    offset: np.ndarray
    speed: np.ndarray
    excluded: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.offset = np.asarray(self.offset, dtype=float)
        self.speed = np.asarray(self.speed, dtype=float)
        self.section = tuple(self.section)
        self.path = tuple(self.path)
        if self.condition not in CONDITIONS:
            raise CalibrationError(f"unknown condition {self.condition!r}")
        if _CONDITION_CLASS[self.condition] != self.vehicle_class:
            raise CalibrationError(f"condition {self.condition} needs class {_CONDITION_CLASS[self.condition]}")
        n = len(self.t)
        if not (len(self.section) == n and len(self.offset) == n and len(self.speed) == n):
            raise CalibrationError("trajectory columns differ in length")
        d = np.diff(self.t)
        if n > 1 and not (np.all(d > 0) and np.all(d <= 1.0 + 1e-6) and np.allclose(d[1:-1], 1.0, atol=1e-6)):
            raise CalibrationError("samples must be 1 s apart (only the trip ends may be closer)")

    def positions(self, network: Network) -> np.ndarray:
        """Distance along ``path`` of every sample."""
        starts = np.concatenate([[0.0], np.cumsum([network.sections[s].length for s in self.path])])
        out = np.empty(len(self.t))
        k = 0
        for i, s in enumerate(self.section):
            while k < len(self.path) and self.path[k] != s:
                k += 1
            if k == len(self.path):
                raise CalibrationError(f"sample {i} on section {s} is not on the log's path")
            out[i] = starts[k] + self.offset[i]
        return out


def log_from_output(output: SimOutput, vehicle_id: str, condition: str, route: str = "") -> TrajectoryLog:
    """Cut one vehicle's 1 Hz log out of a simulation, with the network
    entry and exit added as end samples."""
    rec = next(r for r in output.vehicles if r.id == vehicle_id)
    tr = output.trajectories.for_vehicle(vehicle_id)
    t = tr.t.tolist()
    secs = [tr.sections[i] for i in tr.section.tolist()]
    off = tr.offset.tolist()
    spd = tr.speed.tolist()
    if rec.entered is not None and (not t or t[0] > rec.entered + 1e-9):
        t.insert(0, rec.entered)
        secs.insert(0, rec.path[0])
        off.insert(0, 0.0)
        spd.insert(0, spd[0] if spd else 0.0)
    if rec.exited is not None and t and rec.exited > t[-1] + 1e-9:
        t.append(rec.exited)
        secs.append(rec.path[-1])
        off.append(output.network.sections[rec.path[-1]].length)
        spd.append(spd[-1])
    return TrajectoryLog(rec.vehicle_class, route, condition, rec.path, t, secs, off, spd)


def write_log(logobj: TrajectoryLog, path: Union[str, Path]) -> None:
    """1 Hz delimited text with the trip description in ``#`` header lines."""
    lines = [f"# class: {logobj.vehicle_class}", f"# route: {logobj.route}", f"# condition: {logobj.condition}",
             f"# path: {' '.join(logobj.path)}"]
    if logobj.excluded:
        lines.append("# excluded: " + ";".join(f"{a:g}-{b:g}" for a, b in logobj.excluded))
    lines.append("t_s,section_id,offset_m,speed_mps")
    for t, s, x, v in zip(logobj.t.tolist(), logobj.section, logobj.offset.tolist(), logobj.speed.tolist()):
        lines.append(f"{t:g},{s},{x:.3f},{v:.3f}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_log(path: Union[str, Path]) -> TrajectoryLog:
    meta: Dict[str, str] = {}
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].partition(":")
            meta[key.strip()] = val.strip()
        elif line and not line.startswith("t_s"):
            rows.append(line.split(","))
    for key in ("class", "condition", "path"):
        if key not in meta:
            raise CalibrationError(f"{path}: missing header field {key!r}")
    excluded = ()
    if meta.get("excluded"):
        excluded = tuple(tuple(float(x) for x in part.split("-")) for part in meta["excluded"].split(";"))
    return TrajectoryLog(meta["class"], meta.get("route", ""), meta["condition"], tuple(meta["path"].split()),
                         [float(r[0]) for r in rows], [r[1] for r in rows], [float(r[2]) for r in rows],
                         [float(r[3]) for r in rows], excluded)


# -- travel times ------------------------------------------------------------------

@dataclass(frozen=True)
class SegmentObservation:
    segment: str
    condition: str
    travel_time: float
    trips: int

    def __post_init__(self):
        if not self.travel_time > 0:
            raise CalibrationError(f"segment {self.segment}: travel time must be > 0")
        if self.trips < 1:
            raise CalibrationError(f"segment {self.segment}: need at least one trip")


@dataclass
class TravelTimeTable:
    observations: Dict[Tuple[str, str], SegmentObservation]
    missing: List[Tuple[str, str]] = field(default_factory=list)

    def get(self, segment: str, condition: str) -> Optional[float]:
        ob = self.observations.get((segment, condition))
        return None if ob is None else ob.travel_time

    def conditions(self) -> List[str]:
        return sorted({c for _, c in self.observations})


def _crossing_time(t: np.ndarray, pos: np.ndarray, x: float) -> Optional[float]:
    """First time the position reaches ``x``, interpolated between samples."""
    k = int(np.searchsorted(np.maximum.accumulate(pos), x, side="left"))
    if k >= len(pos):
        return None
    if k == 0:
        return float(t[0]) if pos[0] == x else None
    x0, x1 = pos[k - 1], pos[k]
    return float(t[k - 1] + (t[k] - t[k - 1]) * (x - x0) / (x1 - x0))


def _find(path: Sequence[str], segment: Sequence[str]) -> Optional[int]:
    m = len(segment)
    for i in range(len(path) - m + 1):
        if tuple(path[i:i + m]) == tuple(segment):
            return i
    return None


def segment_travel_times(logs: Sequence[TrajectoryLog], segments: Mapping[str, Sequence[str]],
                         network: Network) -> TravelTimeTable:
    """Mean travel time per (segment, condition) over the logs that fully
    traverse the segment. Flagged intervals inside a traversal are
    subtracted. Segments never traversed under a condition that has logs are
    listed in ``missing``."""
    acc: Dict[Tuple[str, str], List[float]] = {}
    for lg in logs:
        if len(lg.t) < 2:
            continue
        pos = lg.positions(network)
        starts = np.concatenate([[0.0], np.cumsum([network.sections[s].length for s in lg.path])])
        for seg_id, secs in segments.items():
            i = _find(lg.path, secs)
            if i is None:
                continue
            t_in = _crossing_time(lg.t, pos, starts[i])
            t_out = _crossing_time(lg.t, pos, starts[i + len(secs)])
            if t_in is None or t_out is None:
                continue
            tt = t_out - t_in
            for a, b in lg.excluded:
                tt -= max(0.0, min(b, t_out) - max(a, t_in))
            acc.setdefault((seg_id, lg.condition), []).append(tt)
    obs = {k: SegmentObservation(k[0], k[1], float(np.mean(v)), len(v)) for k, v in acc.items()}
    conds = sorted({lg.condition for lg in logs})
    missing = [(s, c) for c in conds for s in segments if (s, c) not in obs]
    return TravelTimeTable(obs, missing)


# -- scores ----------------------------------------------------------------------

def mape(observed: Sequence[float], simulated: Sequence[float]) -> float:
    """Mean absolute percentage error, in percent."""
    o = np.asarray(observed, dtype=float)
    s = np.asarray(simulated, dtype=float)
    if o.shape != s.shape or o.ndim != 1 or o.size == 0:
        raise ValueError("need two equal-length non-empty vectors")
    if np.any(o == 0):
        raise ValueError("observed values must be non-zero")
    return float(100.0 * np.mean(np.abs(o - s) / np.abs(o)))


@dataclass
class FollowingValidation:
    ape: Dict[str, Optional[float]]
    mape: float


def validate_following(observed: Mapping[str, float], simulated: Mapping[str, Optional[float]]) -> FollowingValidation:
    """Per-segment absolute percentage error; segments without a simulated
    value are reported as None and left out of the MAPE."""
    ape: Dict[str, Optional[float]] = {}
    for seg, o in observed.items():
        s = simulated.get(seg)
        ape[seg] = None if s is None else 100.0 * abs(o - s) / o
    valid = [v for v in ape.values() if v is not None]
    return FollowingValidation(ape, float(np.mean(valid)) if valid else math.nan)


def geh(sim: float, obs: float) -> float:
    """GEH statistic for two hourly counts; 0 when both are 0."""
    if sim < 0 or obs < 0:
        raise ValueError("counts must be non-negative")
    if sim + obs == 0:
        return 0.0
    return math.sqrt(2.0 * (sim - obs) ** 2 / (sim + obs))


@dataclass
class GehSummary:
    values: Dict[str, float]

    @property
    def sum_sq(self) -> float:
        return float(sum(v * v for v in self.values.values()))

    def fraction_below(self, limit: float) -> float:
        if not self.values:
            return math.nan
        return sum(v < limit for v in self.values.values()) / len(self.values)

    @property
    def under5(self) -> float:
        return self.fraction_below(5.0)

    @property
    def under10(self) -> float:
        return self.fraction_below(10.0)


def geh_summary(simulated: Mapping[str, float], observed: Mapping[str, float]) -> GehSummary:
    """GEH per detector present in ``observed`` (hourly counts)."""
    return GehSummary({d: geh(float(simulated.get(d, 0.0)), float(observed[d])) for d in sorted(observed)})


def hourly_counts(outputs: Sequence[SimOutput]) -> Dict[str, float]:
    """Detector totals over the measured period, per hour, averaged over
    replications."""
    if not outputs:
        return {}
    hours = outputs[0].config.duration / 3600.0
    out: Dict[str, float] = {}
    for det in outputs[0].detector_counts:
        out[det] = float(np.mean([o.detector_counts[det].sum() for o in outputs])) / hours
    return out


def read_detector_counts(path: Union[str, Path], bin_seconds: float = 300.0) -> Dict[str, float]:
    """Observed counts ``(detector_id, bin, count)`` to hourly totals (bins
    averaged over their number and scaled to an hour)."""
    from .outputs import read_table
    sums: Dict[str, float] = {}
    bins: Dict[str, set] = {}
    for row in read_table(path):
        det = row["detector_id"]
        sums[det] = sums.get(det, 0.0) + float(row["count"])
        bins.setdefault(det, set()).add(row.get("bin", row.get("bin_start_s")))
    return {d: sums[d] * 3600.0 / (len(bins[d]) * bin_seconds) for d in sums}


# -- vehicle parameter grid search ----------------------------------------------

@dataclass
class ParamGrid:
    """Candidate values per parameter of one vehicle class.

    For distributed parameters a candidate sets the mean (the bounds widen
    if needed); scalar parameters are replaced outright.
    """

    vehicle_class: str
    candidates: Dict[str, Tuple[float, ...]]

    def __post_init__(self):
        if self.vehicle_class not in CALIBRATION_CONDITION:
            raise CalibrationError(f"unknown vehicle class {self.vehicle_class!r}")
        if not self.candidates or any(len(v) == 0 for v in self.candidates.values()):
            raise CalibrationError("grid is empty")
        self.candidates = {k: tuple(float(x) for x in v) for k, v in self.candidates.items()}
        for name, vals in self.candidates.items():
            if name not in PARAM_BOUNDS:
                raise CalibrationError(f"parameter {name!r} cannot be calibrated")
            lo, hi = PARAM_BOUNDS[name]
            for x in vals:
                if not lo <= x <= hi:
                    raise CalibrationError(f"{name}={x} outside plausible range [{lo}, {hi}]")

    def __len__(self):
        return int(np.prod([len(v) for v in self.candidates.values()]))

    def points(self) -> Iterator[Dict[str, float]]:
        names = list(self.candidates)
        for combo in itertools.product(*(self.candidates[n] for n in names)):
            yield dict(zip(names, combo))


def apply_params(base: VehicleClassParams, point: Mapping[str, float]) -> VehicleClassParams:
    changes = {}
    for name, x in point.items():
        cur = getattr(base, name)
        if isinstance(cur, ParamDist):
            changes[name] = ParamDist(min(cur.min, x), x, cur.dev, max(cur.max, x))
        else:
            changes[name] = x
    return replace(base, **changes)


@dataclass(frozen=True)
class CalibrationCase:
    """One simulated trip type: ``condition`` on ``path``; the shuttle
    serves ``stops`` (shuttle and following conditions)."""

    condition: str
    path: Tuple[str, ...]
    stops: Tuple[TransitStop, ...] = ()


def route_cases(network: Network, route_id: str) -> List[CalibrationCase]:
    """Cases mirroring field trips on a transit route: the whole route for
    the shuttle, and each road run of the route (split at the shuttle-only
    turns) for free driving and for driving behind the shuttle."""
    route = network.transit_routes[route_id]
    runs: List[List[str]] = [[route.sections[0]]]
    for a, b in zip(route.sections, route.sections[1:]):
        if network.turn(a, b).transit_only:
            runs.append([b])
        else:
            runs[-1].append(b)
    runs = [r for r in runs if not (len(r) == 1 and network.sections[r[0]].upstream_node
                                    == network.sections[r[0]].downstream_node)]
    cases = [CalibrationCase("shuttle", route.sections, route.stops)]
    for r in runs:
        stops = tuple(s for s in route.stops if s.section in r)
        cases.append(CalibrationCase("free", tuple(r)))
        cases.append(CalibrationCase("following-shuttle", tuple(r), stops))
    return cases


def cases_from_logs(logs: Sequence[TrajectoryLog], network: Network) -> List[CalibrationCase]:
    """One case per distinct (condition, path) among the logs. Shuttle
    trips serve the stops of their transit route that lie on the path."""
    seen: Dict[Tuple[str, Tuple[str, ...]], CalibrationCase] = {}
    for lg in logs:
        key = (lg.condition, lg.path)
        if key in seen:
            continue
        stops: Tuple[TransitStop, ...] = ()
        if lg.condition != "free":
            routes = [network.transit_routes[lg.route]] if lg.route in network.transit_routes else [
                r for r in network.transit_routes.values() if _find(r.sections, lg.path) is not None]
            if routes:
                stops = tuple(s for s in routes[0].stops if s.section in lg.path)
        seen[key] = CalibrationCase(lg.condition, lg.path, stops)
    return list(seen.values())


def simulate_cases(network: Network, classes: Mapping[str, VehicleClassParams], cases: Sequence[CalibrationCase],
                   replications: int = 1, seed: int = 0, conditions: Optional[Sequence[str]] = None
                   ) -> List[TrajectoryLog]:
    """Simulate every case in an otherwise empty network and return the 1 Hz
    logs of the observed vehicle. Driver draws for replication ``r`` come
    from the seed sequence ``(seed, r, case index)``."""
    logs = []
    for ci, case in enumerate(cases):
        if conditions is not None and case.condition not in conditions:
            continue
        for r in range(replications):
            rng = np.random.default_rng([seed, r, ci])
            hdv = sample_driver(classes["hdv"], rng)
            shuttle = sample_driver(classes["shuttle"], rng)
            if case.condition == "free":
                trips = [ScriptedTrip("hdv", case.path, 0.0, hdv)]
            elif case.condition == "shuttle":
                trips = [ScriptedTrip("shuttle", case.path, 0.0, shuttle, case.stops)]
            else:
                trips = [ScriptedTrip("shuttle", case.path, 0.0, shuttle, case.stops),
                         ScriptedTrip("hdv", case.path, FOLLOW_HEADWAY, hdv)]
            slow = path_ideal_time(network, case.path, lambda lim: min(lim, shuttle.max_speed))
            horizon = 3.0 * slow + sum(s.dwell for s in case.stops) + 120.0
            cfg = SimConfig(duration=math.ceil(horizon), warmup=0.0, seed=seed)
            out = run(cfg, network, classes=classes, trips=trips)
            observed = "x1" if case.condition == "following-shuttle" else "x0"
            logs.append(log_from_output(out, observed, case.condition))
    return logs


@dataclass
class GridScore:
    index: int
    params: Dict[str, float]
    mape: Dict[str, float]
    error: Optional[str] = None


@dataclass
class GridResult:
    vehicle_class: str
    condition: str
    best: Dict[str, float]
    best_mape: float
    classes: Dict[str, VehicleClassParams]
    table: List[GridScore]


def condition_mape(observed: TravelTimeTable, simulated: TravelTimeTable, condition: str) -> float:
    segs = sorted(s for s, c in observed.observations if c == condition)
    if not segs:
        raise CalibrationError(f"no observations for condition {condition}")
    missing = [s for s in segs if simulated.get(s, condition) is None]
    if missing:
        raise CalibrationError(f"simulation produced no {condition} travel time on {', '.join(missing)}")
    return mape([observed.get(s, condition) for s in segs], [simulated.get(s, condition) for s in segs])


def grid_search_vehicle_params(grid: ParamGrid, network: Network, observed: TravelTimeTable,
                               segments: Mapping[str, Sequence[str]], cases: Sequence[CalibrationCase],
                               base: Optional[Mapping[str, VehicleClassParams]] = None,
                               replications: int = 1, seed: int = 0) -> GridResult:
    """Exhaustive search over ``grid``: each point is simulated under every
    observed condition and ranked by the MAPE of the class's calibration
    condition (free flow for cars, the shuttle's own trips for shuttles).
    Ties keep the earlier grid point. Points whose simulation fails are
    recorded and skipped."""
    base = dict(base or {"hdv": HDV, "shuttle": SHUTTLE})
    target = CALIBRATION_CONDITION[grid.vehicle_class]
    if target not in observed.conditions():
        raise CalibrationError(f"observations lack the calibration condition {target!r}")
    conds = [c for c in observed.conditions() if any(cs.condition == c for cs in cases)]
    table: List[GridScore] = []
    best_i, best_val = None, math.inf
    for i, point in enumerate(grid.points()):
        classes = dict(base)
        classes[grid.vehicle_class] = apply_params(base[grid.vehicle_class], point)
        try:
            logs = simulate_cases(network, classes, cases, replications, seed, conds)
            sim = segment_travel_times(logs, segments, network)
            scores = {c: condition_mape(observed, sim, c) for c in conds}
        except Exception as exc:  # a failing point must not end the search
            log.warning("grid point %d %s failed: %s", i, point, exc)
            table.append(GridScore(i, point, {}, str(exc)))
            continue
        table.append(GridScore(i, point, scores))
        if scores[target] < best_val:
            best_i, best_val = i, scores[target]
    if best_i is None:
        raise CalibrationError("every grid point failed")
    best = table[best_i].params
    classes = dict(base)
    classes[grid.vehicle_class] = apply_params(base[grid.vehicle_class], best)
    return GridResult(grid.vehicle_class, target, best, best_val, classes, table)


# -- OD adjustment ----------------------------------------------------------------

CountsFn = Callable[[OdMatrix], Mapping[str, float]]


def assignment_counts(network: Network, model: RouteChoiceModel = OFF_PEAK_MODEL,
                      period: float = 3600.0) -> CountsFn:
    """Analytic loading: hourly detector counts of a matrix whose trips are
    split over free-flow path choice probabilities."""
    cache: Dict[Tuple[str, str], List[Tuple[Tuple[str, ...], float]]] = {}
    det_by_section: Dict[str, List[str]] = {}
    for d in network.detectors.values():
        det_by_section.setdefault(d.section, []).append(d.id)

    def counts(matrix: OdMatrix) -> Dict[str, float]:
        out = {d: 0.0 for d in sorted(network.detectors)}
        for o, d, q in matrix.pairs():
            if (o, d) not in cache:
                ps = path_set(network, o, d, model)
                cache[(o, d)] = list(zip(ps.paths, ps.probabilities.tolist()))
            for secs, p in cache[(o, d)]:
                for s in secs:
                    for det in det_by_section.get(s, ()):
                        out[det] += q * p * 3600.0 / period
        return out

    return counts


@dataclass
class OdAdjustment:
    matrix: OdMatrix
    before: GehSummary
    after: GehSummary
    objective: List[float]
    accepted: int
    iterations: int


def adjust_od(seed_matrix: OdMatrix, observed: Mapping[str, float], counts_fn: CountsFn, bound: float = 0.5,
              iterations: int = 200, penalty: float = 1.0, seed: int = 0, step: float = 0.2,
              perturbation: float = 0.05) -> OdAdjustment:
    """Bounded multiplicative OD adjustment by simultaneous perturbation.

    Minimizes ``sum(GEH^2) + penalty * sum((cell / seed_cell - 1)^2)`` over
    the non-zero cells, each kept within ``seed * (1 +/- bound)``. A step is
    accepted only if it lowers the objective, so the objective never rises.
    """
    if np.any(seed_matrix.trips < 0):
        raise ValueError("seed matrix must be non-negative")
    base = seed_matrix.trips
    cells = np.flatnonzero(base > 0)
    rng = np.random.default_rng(seed)

    def matrix_of(x):
        m = base.copy().ravel()
        m[cells] = m[cells] * (1.0 + x)
        return OdMatrix(seed_matrix.centroids, m.reshape(base.shape))

    def objective(x):
        return geh_summary(counts_fn(matrix_of(x)), observed).sum_sq + penalty * float(np.sum(x * x))

    x = np.zeros(len(cells))
    f = objective(x)
    history = [f]
    accepted = 0
    before = geh_summary(counts_fn(seed_matrix), observed)
    for k in range(iterations):
        if f == 0.0 or len(cells) == 0:
            break
        ck = perturbation / (k + 1) ** 0.101
        ak = step / (k + 1) ** 0.602
        delta = rng.choice([-1.0, 1.0], size=len(cells))
        g = (objective(np.clip(x + ck * delta, -bound, bound)) - objective(np.clip(x - ck * delta, -bound, bound)))
        g = g / (2.0 * ck) * delta
        norm = np.max(np.abs(g))
        if norm == 0:
            continue
        for _ in range(4):
            cand = np.clip(x - ak * g / norm, -bound, bound)
            fc = objective(cand)
            if fc < f:
                x, f = cand, fc
                accepted += 1
                history.append(f)
                break
            ak *= 0.5
    m = matrix_of(x)
    return OdAdjustment(m, before, geh_summary(counts_fn(m), observed), history, accepted, iterations)
