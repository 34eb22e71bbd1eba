"""Shuttle scenarios, HDV impact metrics, the S4 speed-tuning loop and
report tables.

Metrics are computed per segment group from HDV traversals. The aggregated
row pools the traversals of all groups, so busy groups weigh more.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .behavior import HDV, SHUTTLE, VehicleClassParams
from .demand import DemandProfile
from .engine import SimConfig, SimOutput, Traversal, run
from .network import Network
from .outputs import write_table
from .routing import OFF_PEAK_MODEL, PEAK_MODEL, AssignmentPlan, RouteChoiceModel, iterate_assignment
from .units import MPH, mps_to_mph

PERIODS = ("off-peak", "peak")
ROUTE_MODELS = {"off-peak": OFF_PEAK_MODEL, "peak": PEAK_MODEL}
AGGREGATED = "Aggregated"
BASE_SHUTTLE_MPH = 9.5


@dataclass(frozen=True)
class Scenario:
    """Shuttle service variant: dispatch headway in minutes (None for no
    service) and an optional shuttle speed cap in mph."""

    id: str
    headway: Optional[float]
    shuttle_speed: Optional[float] = None
    period: str = "off-peak"
    routes: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        if self.period not in PERIODS:
            raise ValueError(f"unknown period {self.period!r}")
        if self.headway is not None and not self.headway > 0:
            raise ValueError("headway must be > 0")
        if self.shuttle_speed is not None and not self.shuttle_speed > 0:
            raise ValueError("shuttle speed must be > 0")
        if self.id == "S0" and self.headway is not None:
            raise ValueError("S0 runs without shuttles")


HEADWAYS: Dict[str, Optional[float]] = {"S0": None, "S1": 30.0, "S2": 20.0, "S3": 10.0, "S4": 10.0}
SCENARIO_IDS = tuple(HEADWAYS)
# S4 speeds used when no tuning is run
DEFAULT_S4_SPEED = {"off-peak": 15.0, "peak": 20.0}


def scenario(sid: str, period: str = "off-peak", shuttle_speed: Optional[float] = None) -> Scenario:
    """One of S0..S4. S4 keeps S3's headway with a raised speed cap."""
    if sid not in HEADWAYS:
        raise ValueError(f"unknown scenario {sid!r}; expected one of {', '.join(SCENARIO_IDS)}")
    if sid == "S4" and shuttle_speed is None:
        shuttle_speed = DEFAULT_S4_SPEED[period]
    if sid != "S4" and shuttle_speed is not None:
        raise ValueError("only S4 overrides the shuttle speed")
    return Scenario(sid, HEADWAYS[sid], shuttle_speed, period)


# -- metrics -------------------------------------------------------------------

def delay_ratio(traversals: Sequence[Traversal]) -> Optional[float]:
    """100 * total delay / total travel time, each traversal's delay being
    its travel time beyond the ideal time at the driver's desired speed
    (never negative). None when there are no traversals."""
    if not traversals:
        return None
    actual = np.array([t.travel_time for t in traversals])
    ideal = np.array([t.ideal for t in traversals])
    total = actual.sum()
    if total <= 0:
        return 0.0
    return float(100.0 * np.maximum(actual - ideal, 0.0).sum() / total)


def weighted_speed(traversals: Sequence[Traversal]) -> Optional[float]:
    """Total distance over total time, in mph."""
    if not traversals:
        return None
    time = sum(t.travel_time for t in traversals)
    if time <= 0:
        return None
    return float(mps_to_mph(sum(t.distance for t in traversals) / time))


@dataclass(frozen=True)
class GroupMetric:
    ratio: Optional[float]
    speed: Optional[float]
    traversals: int


def output_metrics(output: SimOutput, groups: Optional[Sequence[str]] = None) -> Dict[str, GroupMetric]:
    """HDV metrics per segment group plus the aggregated row."""
    groups = list(groups or output.network.segment_groups)
    hdv = [t for t in output.traversals if t.vehicle_class == "hdv"]
    out = {}
    for g in groups:
        trs = [t for t in hdv if t.group == g]
        out[g] = GroupMetric(delay_ratio(trs), weighted_speed(trs), len(trs))
    pooled = [t for t in hdv if t.group in groups]
    out[AGGREGATED] = GroupMetric(delay_ratio(pooled), weighted_speed(pooled), len(pooled))
    return out


# -- experiment matrix -------------------------------------------------------------

@dataclass(frozen=True)
class RawRow:
    scenario: str
    period: str
    replication: int
    seed: int
    group: str
    ratio: Optional[float]
    speed: Optional[float]
    traversals: int


@dataclass
class TuneResult:
    period: str
    speed: float
    ratio: Optional[float]
    target: float
    epsilon: float
    converged: bool
    attempts: List[Tuple[float, Optional[float]]]


@dataclass
class MetricsReport:
    """Replication means per (group, scenario, period) and the raw values."""

    groups: List[str]
    scenarios: List[str]
    periods: List[str]
    cells: Dict[Tuple[str, str, str], GroupMetric]
    raw: List[RawRow] = field(default_factory=list)
    speeds: Dict[Tuple[str, str], Optional[float]] = field(default_factory=dict)
    tuned: Dict[str, TuneResult] = field(default_factory=dict)

    def ratio(self, group: str, scenario_id: str, period: str = "off-peak") -> Optional[float]:
        return self.cells[(group, scenario_id, period)].ratio

    def speed(self, group: str, scenario_id: str, period: str = "off-peak") -> Optional[float]:
        return self.cells[(group, scenario_id, period)].speed

    @property
    def rows(self) -> List[str]:
        return self.groups + [AGGREGATED]


def _mean(values: Sequence[Optional[float]]) -> Optional[float]:
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def summarize(raw: Sequence[RawRow], groups: Sequence[str], scenarios: Sequence[str],
              periods: Sequence[str]) -> Dict[Tuple[str, str, str], GroupMetric]:
    cells = {}
    for p in periods:
        for s in scenarios:
            for g in list(groups) + [AGGREGATED]:
                rows = [r for r in raw if (r.group, r.scenario, r.period) == (g, s, p)]
                cells[(g, s, p)] = GroupMetric(_mean([r.ratio for r in rows]), _mean([r.speed for r in rows]),
                                               sum(r.traversals for r in rows))
    return cells


@dataclass(frozen=True)
class _Cell:
    scenario: Scenario
    replication: int
    seed: int


def _run_cell(args) -> List[RawRow]:
    cell, network, demand, classes, config, plan, model = args
    cfg = replace(config, seed=cell.seed)
    out = run(cfg, network, demand, cell.scenario, classes, plan, model)
    rows = []
    for g, m in output_metrics(out).items():
        rows.append(RawRow(cell.scenario.id, cell.scenario.period, cell.replication, cell.seed, g, m.ratio, m.speed,
                           m.traversals))
    return rows


def _run_cells(cells: Sequence[_Cell], network: Network, demand: Mapping[str, DemandProfile],
               classes: Mapping[str, VehicleClassParams], config: SimConfig,
               plans: Mapping[str, AssignmentPlan], workers: int) -> List[RawRow]:
    jobs = [(c, network, demand[c.scenario.period], dict(classes), config, plans[c.scenario.period],
             ROUTE_MODELS[c.scenario.period]) for c in cells]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, jobs))
    else:
        results = [_run_cell(j) for j in jobs]
    return [row for rows in results for row in rows]


def _plans(network: Network, demand: Mapping[str, DemandProfile], periods: Sequence[str]) -> Dict[str, AssignmentPlan]:
    return {p: iterate_assignment(network, demand[p], ROUTE_MODELS[p]) for p in periods}


def replication_seeds(seed: int, replications: int) -> List[int]:
    """Replication ``r`` uses seed ``seed + r`` in every scenario, so all
    scenarios see the same arrivals."""
    return [seed + r for r in range(replications)]


def run_matrix(network: Network, demand: Mapping[str, DemandProfile], scenarios: Sequence[str] = SCENARIO_IDS,
               periods: Sequence[str] = ("off-peak",), replications: int = 5, seed: int = 0,
               classes: Optional[Mapping[str, VehicleClassParams]] = None, config: Optional[SimConfig] = None,
               s4_speed: Optional[Mapping[str, float]] = None, workers: int = 1) -> MetricsReport:
    """Run every (scenario, period) for ``replications`` seeds and average
    the metrics per segment group."""
    if replications < 1:
        raise ValueError("need at least one replication")
    missing = [p for p in periods if p not in demand]
    if missing:
        raise ValueError(f"no demand for period(s) {', '.join(missing)}")
    classes = dict(classes or {"hdv": HDV, "shuttle": SHUTTLE})
    config = config or SimConfig()
    s4_speed = dict(DEFAULT_S4_SPEED, **(s4_speed or {}))
    plans = _plans(network, demand, periods)
    cells = []
    speeds = {}
    for p in periods:
        for sid in scenarios:
            sc = scenario(sid, p, s4_speed[p] if sid == "S4" else None)
            speeds[(sid, p)] = sc.shuttle_speed if sc.shuttle_speed is not None else (
                None if sc.headway is None else mps_to_mph(classes["shuttle"].max_speed))
            for r, s in enumerate(replication_seeds(seed, replications)):
                cells.append(_Cell(sc, r, s))
    raw = _run_cells(cells, network, demand, classes, config, plans, workers)
    groups = list(network.segment_groups)
    return MetricsReport(groups, list(scenarios), list(periods), summarize(raw, groups, scenarios, periods), raw, speeds)


def route_speed_limit(network: Network) -> float:
    """Highest speed limit (mph) on any transit route section."""
    limits = [network.sections[s].speed_limit for r in network.transit_routes.values() for s in r.sections]
    return float(mps_to_mph(max(limits))) if limits else 0.0


def tune_shuttle_speed(network: Network, demand: DemandProfile, target: float, base_ratio: Optional[float] = None,
                       period: str = "off-peak", epsilon: float = 1.5, step: float = 2.5,
                       start: float = BASE_SHUTTLE_MPH, max_speed: Optional[float] = None, replications: int = 5,
                       seed: int = 0, classes: Optional[Mapping[str, VehicleClassParams]] = None,
                       config: Optional[SimConfig] = None, workers: int = 1) -> TuneResult:
    """Raise the S3 shuttle speed cap from ``start`` in ``step`` mph
    increments until the aggregated HDV delay ratio is within ``epsilon``
    points of ``target`` (the S0 ratio). The cap is the larger of the
    route's speed limit and ``max_speed``. If no speed qualifies, the
    closest attempt is returned with ``converged`` False.

    ``base_ratio`` is the S3 ratio at ``start`` when already known.
    """
    if not step > 0 or not epsilon >= 0:
        raise ValueError("step must be > 0 and epsilon >= 0")
    classes = dict(classes or {"hdv": HDV, "shuttle": SHUTTLE})
    config = config or SimConfig()
    cap = max(route_speed_limit(network), max_speed or 0.0)
    plans = _plans(network, {period: demand}, (period,))
    seeds = replication_seeds(seed, replications)

    def ratio_at(speed: Optional[float]) -> Optional[float]:
        if speed is None:
            sc = scenario("S3", period)
        else:
            sc = Scenario("S4", HEADWAYS["S4"], speed, period)
        cells = [_Cell(sc, r, s) for r, s in enumerate(seeds)]
        raw = _run_cells(cells, network, {period: demand}, classes, config, plans, workers)
        return _mean([r.ratio for r in raw if r.group == AGGREGATED])

    def close(r):
        return r is not None and abs(r - target) <= epsilon + 1e-12

    if base_ratio is None:
        cls = classes["shuttle"]
        base_ratio = ratio_at(None if math.isclose(cls.max_speed, start * MPH) else start)
    attempts: List[Tuple[float, Optional[float]]] = [(start, base_ratio)]
    if close(base_ratio):
        return TuneResult(period, start, base_ratio, target, epsilon, True, attempts)
    speed = start
    while speed < cap - 1e-9:
        speed = min(speed + step, cap)
        r = ratio_at(speed)
        attempts.append((speed, r))
        if close(r):
            return TuneResult(period, speed, r, target, epsilon, True, attempts)
    scored = [(abs(r - target), i) for i, (_, r) in enumerate(attempts) if r is not None]
    best = attempts[min(scored)[1]] if scored else attempts[-1]
    return TuneResult(period, best[0], best[1], target, epsilon, False, attempts)


# -- reports ---------------------------------------------------------------------------

def _num(x: Optional[float]) -> str:
    return "" if x is None else f"{x:.2f}"


def report_rows(report: MetricsReport) -> List[Tuple]:
    rows = []
    for p in report.periods:
        for s in report.scenarios:
            spd = report.speeds.get((s, p))
            for g in report.rows:
                m = report.cells[(g, s, p)]
                rows.append((p, s, "" if spd is None else f"{spd:.1f}", g, _num(m.ratio), _num(m.speed),
                             m.traversals))
    return rows


def write_report(report: MetricsReport, directory: Union[str, Path], meta: Sequence[str] = ()) -> List[Path]:
    """Summary table, raw per-replication values, tuning attempts and the
    grid layout (rows = groups, columns = scenario x {ratio, speed})."""
    d = Path(directory)
    paths = [
        write_table(d / "metrics.csv", ("period", "scenario", "shuttle_speed_mph", "group", "delay_ratio_pct",
                                        "speed_mph", "traversals"), report_rows(report), meta),
        write_table(d / "metrics_raw.csv", ("period", "scenario", "replication", "seed", "group", "delay_ratio_pct",
                                            "speed_mph", "traversals"),
                    ((r.period, r.scenario, r.replication, r.seed, r.group, _num(r.ratio), _num(r.speed),
                      r.traversals) for r in report.raw), meta),
    ]
    if report.tuned:
        rows = []
        for p, tr in sorted(report.tuned.items()):
            for spd, r in tr.attempts:
                rows.append((p, f"{spd:.1f}", _num(r), f"{tr.target:.2f}", int(spd == tr.speed), int(tr.converged)))
        paths.append(write_table(d / "s4_tuning.csv", ("period", "shuttle_speed_mph", "delay_ratio_pct", "target_pct",
                                                       "selected", "converged"), rows, meta))
    text = "\n".join(list(meta) + [format_grid(report)]) + "\n"
    grid = d / "metrics_grid.txt"
    grid.write_text(text)
    paths.append(grid)
    return paths


def format_grid(report: MetricsReport) -> str:
    """Fixed-width grid: one block per period, one column pair per scenario."""
    blocks = []
    width = max(len(g) for g in report.rows) + 2
    for p in report.periods:
        heads = []
        for s in report.scenarios:
            spd = report.speeds.get((s, p))
            label = s if spd is None else f"{s} ({spd:.1f} mph)"
            if s == "S4" and p in report.tuned and not report.tuned[p].converged:
                label += " *"
            heads.append(label)
        colw = max(22, max(len(h) for h in heads) + 2)
        lines = [f"HDV statistics, {p}",
                 " " * width + "".join(h.center(colw) for h in heads),
                 "Segment".ljust(width) + "".join("Ratio(%)  Speed(mph)".center(colw) for _ in heads)]
        for g in report.rows:
            cells = []
            for s in report.scenarios:
                m = report.cells[(g, s, p)]
                cells.append(f"{_num(m.ratio) or '-':>8}  {_num(m.speed) or '-':>10}".center(colw))
            lines.append(g.ljust(width) + "".join(cells))
        blocks.append("\n".join(lines))
    note = "\n* best attempt; S4 tuning did not reach the S0 ratio" if any(
        not t.converged for t in report.tuned.values()) else ""
    return "\n\n".join(blocks) + note


def read_report(directory: Union[str, Path]) -> MetricsReport:
    """Rebuild a report from the tables written by :func:`write_report`."""
    from .outputs import read_table
    d = Path(directory)
    if not (d / "metrics.csv").exists():
        raise FileNotFoundError(f"{d / 'metrics.csv'} not found")

    def num(x):
        return float(x) if x != "" else None

    rows = read_table(d / "metrics.csv")
    groups: List[str] = []
    scenarios: List[str] = []
    periods: List[str] = []
    cells = {}
    speeds = {}
    for r in rows:
        for seq, val in ((periods, r["period"]), (scenarios, r["scenario"])):
            if val not in seq:
                seq.append(val)
        if r["group"] != AGGREGATED and r["group"] not in groups:
            groups.append(r["group"])
        cells[(r["group"], r["scenario"], r["period"])] = GroupMetric(num(r["delay_ratio_pct"]), num(r["speed_mph"]),
                                                                      int(r["traversals"]))
        speeds[(r["scenario"], r["period"])] = num(r["shuttle_speed_mph"])
    raw = []
    if (d / "metrics_raw.csv").exists():
        for r in read_table(d / "metrics_raw.csv"):
            raw.append(RawRow(r["scenario"], r["period"], int(r["replication"]), int(r["seed"]), r["group"],
                              num(r["delay_ratio_pct"]), num(r["speed_mph"]), int(r["traversals"])))
    tuned: Dict[str, TuneResult] = {}
    if (d / "s4_tuning.csv").exists():
        for r in read_table(d / "s4_tuning.csv"):
            p = r["period"]
            tr = tuned.setdefault(p, TuneResult(p, math.nan, None, float(r["target_pct"]), math.nan,
                                                bool(int(r["converged"])), []))
            tr.attempts.append((float(r["shuttle_speed_mph"]), num(r["delay_ratio_pct"])))
            if int(r["selected"]):
                tr.speed, tr.ratio = float(r["shuttle_speed_mph"]), num(r["delay_ratio_pct"])
    return MetricsReport(groups, scenarios, periods, cells, raw, speeds, tuned)
