"""Command-line front end: ``shuttlesim simulate | calibrate | scenarios | report``.

Inputs come from flags or a JSON manifest given with ``--config``; flags win.
Networks and demand may name a built-in fixture as ``fixture:<name>``.
Failures print one JSON error record to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import calibration as cal
from . import experiments as exp
from . import fixtures
from .behavior import default_classes, load_vehicle_params, save_vehicle_params, class_params_to_dict
from .demand import DemandProfile, load_demand, save_demand, save_od_matrix
from .engine import SimConfig, run
from .network import Network, load_network
from .outputs import file_digest, object_digest, provenance, write_sim_output, write_table

OUTPUT_ENV = "SHUTTLESIM_OUTPUT_DIR"
DEFAULT_OUTPUT = "shuttlesim-out"

NETWORK_FIXTURES = {
    "corridor": fixtures.corridor_fixture,
    "single-lane": fixtures.single_lane_corridor,
    "grid": fixtures.grid_fixture,
}


def _fixture_demand(name: str) -> Dict[str, DemandProfile]:
    if name == "corridor":
        return {p: fixtures.corridor_demand(p) for p in exp.PERIODS}
    if name == "single-lane":
        return {"off-peak": fixtures.single_lane_demand(250.0), "peak": fixtures.single_lane_demand(325.0)}
    if name == "grid":
        prof = DemandProfile.uniform(fixtures.grid_od())
        return {"off-peak": prof, "peak": prof.scaled(fixtures.PEAK_FACTOR)}
    raise InputError(f"unknown demand fixture {name!r}", name)


class InputError(ValueError):
    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(message)
        self.path = path


class Inputs:
    """Resolved options: flag value, else manifest entry, else default."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.manifest: Dict = {}
        self.base = Path(".")
        if getattr(args, "config", None):
            p = Path(args.config)
            if not p.is_file():
                raise InputError(f"manifest not found: {p}", str(p))
            try:
                self.manifest = json.loads(p.read_text())
            except json.JSONDecodeError as e:
                raise InputError(f"manifest {p} is not valid JSON: {e}", str(p)) from None
            self.base = p.parent
        self.digests: Dict[str, str] = {}

    def get(self, key: str, default=None):
        val = getattr(self.args, key, None)
        if val is not None:
            return val
        return self.manifest.get(key, default)

    def path(self, key: str, required: bool = True) -> Optional[str]:
        val = self.get(key)
        if val is None:
            if required:
                raise InputError(f"missing input: {key}")
            return None
        if str(val).startswith("fixture:"):
            return str(val)
        p = Path(val)
        if not p.is_absolute() and getattr(self.args, key, None) is None:
            p = self.base / p
        if not p.exists():
            raise InputError(f"{key} file not found: {p}", str(p))
        return str(p)

    def output_dir(self) -> Path:
        out = self.get("output") or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT
        d = Path(out)
        d.mkdir(parents=True, exist_ok=True)
        return d

    def network(self) -> Network:
        src = self.path("network")
        if src.startswith("fixture:"):
            name = src.split(":", 1)[1]
            if name not in NETWORK_FIXTURES:
                raise InputError(f"unknown network fixture {name!r}", src)
            net = NETWORK_FIXTURES[name]()
            self.digests["network"] = object_digest(net.to_dict())
            return net
        net = _parse(load_network, src)
        self.digests["network"] = file_digest(src)
        return net

    def classes(self):
        src = self.path("vehicles", required=False)
        if src is None:
            classes = default_classes()
            self.digests["vehicles"] = object_digest({k: class_params_to_dict(v) for k, v in classes.items()})
            return classes
        classes = _parse(load_vehicle_params, src)
        self.digests["vehicles"] = file_digest(src)
        return classes

    def demand(self) -> Dict[str, DemandProfile]:
        src = self.path("demand")
        if src.startswith("fixture:"):
            prof = _fixture_demand(src.split(":", 1)[1])
            self.digests["demand"] = object_digest({k: v.to_dict() for k, v in prof.items()})
            return prof
        prof = _parse(load_demand, src)
        self.digests["demand"] = file_digest(src)
        return prof

    def meta(self, command: str, seed: Optional[int] = None, **extra) -> List[str]:
        return provenance(self.digests, seed, command=command, **extra)


def _parse(loader, path):
    try:
        return loader(path)
    except (KeyError, ValueError, TypeError, json.JSONDecodeError) as e:
        raise InputError(f"cannot parse {path}: {e}", str(path)) from None


def _period_demand(profiles: Dict[str, DemandProfile], period: str) -> DemandProfile:
    if period in profiles:
        return profiles[period]
    if "default" in profiles:
        return profiles["default"]
    raise InputError(f"demand has no period {period!r} (has {', '.join(sorted(profiles))})")


def _sim_config(inp: Inputs, seed: int) -> SimConfig:
    kw = {"seed": seed}
    for key in ("duration", "warmup", "step"):
        if inp.get(key) is not None:
            kw[key] = float(inp.get(key))
    return SimConfig(**kw)


# -- commands ----------------------------------------------------------------------

def cmd_simulate(inp: Inputs) -> Dict:
    net = inp.network()
    classes = inp.classes()
    period = inp.get("period", "off-peak")
    demand = _period_demand(inp.demand(), period) if inp.get("demand") is not None else None
    seed = int(inp.get("seed", 0))
    sid = inp.get("scenario")
    if sid is not None:
        sc = exp.scenario(sid, period, inp.get("shuttle_speed") if sid == "S4" else None)
    else:
        sc = exp.Scenario("custom", inp.get("headway"), inp.get("shuttle_speed"), period)
    cfg = _sim_config(inp, seed)
    out = run(cfg, net, demand, sc, classes, route_model=exp.ROUTE_MODELS[period])
    d = inp.output_dir()
    meta = inp.meta("simulate", seed, scenario=sc.id, headway_min=sc.headway, shuttle_speed_mph=sc.shuttle_speed,
                    period=period, duration_s=cfg.duration, warmup_s=cfg.warmup)
    files = write_sim_output(out, d, meta)
    return {"command": "simulate", "files": [str(f) for f in files], "injected": out.injected,
            "exited": out.exited, "in_network": out.in_network, "queued": out.queued}


def _trajectory_files(inp: Inputs) -> List[Path]:
    srcs = inp.get("trajectories")
    if not srcs:
        raise InputError("missing input: trajectories")
    if isinstance(srcs, str):
        srcs = [srcs]
    files: List[Path] = []
    for s in srcs:
        p = Path(s)
        if not p.is_absolute() and inp.manifest.get("trajectories") is srcs:
            p = inp.base / p
        if p.is_dir():
            files += sorted(p.glob("*.csv"))
        elif p.is_file():
            files.append(p)
        else:
            raise InputError(f"trajectories not found: {p}", str(p))
    if not files:
        raise InputError("no trajectory files found")
    return files


def _grid(inp: Inputs, vehicle_class: str) -> cal.ParamGrid:
    raw = inp.get("grid")
    if raw is None:
        raise InputError("missing input: grid (JSON object or file of parameter -> candidate list)")
    if isinstance(raw, str):
        p = Path(raw)
        if p.is_file():
            raw = json.loads(p.read_text())
        else:
            try:
                raw = json.loads(raw)
            except json.JSONDecodeError:
                raise InputError(f"grid is neither a file nor JSON: {raw}", raw) from None
    return cal.ParamGrid(vehicle_class, {k: tuple(v) for k, v in raw.items()})


def cmd_calibrate_vehicles(inp: Inputs) -> Dict:
    net = inp.network()
    base = inp.classes()
    vclass = inp.get("vehicle_class", "hdv")
    files = _trajectory_files(inp)
    logs = [_parse(cal.read_log, f) for f in files]
    inp.digests["trajectories"] = object_digest([file_digest(f) for f in files])
    segments = {g.name: g.sections for g in net.segment_groups.values()}
    if inp.get("segments"):
        segments = json.loads(Path(inp.path("segments")).read_text())
    observed = cal.segment_travel_times(logs, segments, net)
    grid = _grid(inp, vclass)
    inp.digests["grid"] = object_digest(grid.candidates)
    seed = int(inp.get("seed", 0))
    reps = int(inp.get("replications", 1))
    cases = cal.cases_from_logs(logs, net)
    res = cal.grid_search_vehicle_params(grid, net, observed, segments, cases, base, reps, seed)
    d = inp.output_dir()
    meta = inp.meta("calibrate vehicles", seed, vehicle_class=vclass, replications=reps)
    params_path = d / "vehicle_params.json"
    save_vehicle_params(res.classes, params_path)
    names = list(grid.candidates)
    conds = sorted({c for row in res.table for c in row.mape})
    write_table(d / "grid_scores.csv", ["index"] + names + [f"mape_{c}" for c in conds] + ["error"],
                ([r.index] + [r.params[n] for n in names] + [r.mape.get(c, "") for c in conds] + [r.error or ""]
                 for r in res.table), meta)
    best_row = next(r for r in res.table if r.params == res.best)
    write_table(d / "accuracy.csv", ("vehicle_class", "condition", "mape_pct", "role"),
                ((vclass, c, best_row.mape[c], "calibration" if c == res.condition else "validation")
                 for c in conds), meta)
    sim = cal.segment_travel_times(cal.simulate_cases(net, res.classes, cases, reps, seed), segments, net)
    rows = []
    for (seg, c), ob in sorted(observed.observations.items()):
        s = sim.get(seg, c)
        ape = None if s is None else 100.0 * abs(ob.travel_time - s) / ob.travel_time
        rows.append((seg, c, ob.travel_time, "" if s is None else s, "" if ape is None else ape, ob.trips))
    write_table(d / "segment_errors.csv", ("segment", "condition", "observed_s", "simulated_s", "ape_pct", "trips"),
                rows, meta)
    return {"command": "calibrate vehicles", "best": res.best, "mape": res.best_mape, "condition": res.condition,
            "files": [str(params_path), str(d / "grid_scores.csv"), str(d / "accuracy.csv"),
                      str(d / "segment_errors.csv")]}


def cmd_calibrate_demand(inp: Inputs) -> Dict:
    net = inp.network()
    period = inp.get("period", "off-peak")
    profile = _period_demand(inp.demand(), period)
    det_path = inp.path("detectors")
    observed = _parse(cal.read_detector_counts, det_path)
    inp.digests["detectors"] = file_digest(det_path)
    unknown = sorted(set(observed) - set(net.detectors))
    if unknown:
        raise InputError(f"observed detectors not in network: {', '.join(unknown)}", det_path)
    seed = int(inp.get("seed", 0))
    counts = cal.assignment_counts(net, exp.ROUTE_MODELS[period], profile.duration)
    res = cal.adjust_od(profile.total_matrix(), observed, counts, bound=float(inp.get("bound", 0.5)),
                        iterations=int(inp.get("iterations", 200)), penalty=float(inp.get("penalty", 1.0)), seed=seed)
    d = inp.output_dir()
    meta = inp.meta("calibrate demand", seed, period=period)
    save_od_matrix(res.matrix, d / "od_adjusted.json")
    save_demand({period: profile.with_totals(res.matrix)}, d / "demand_adjusted.json")
    summary = [(stage, len(s.values), 100.0 * s.under5, 100.0 * s.under10, s.sum_sq)
               for stage, s in (("before", res.before), ("after", res.after))]
    write_table(d / "geh_summary.csv", ("stage", "detectors", "geh_lt5_pct", "geh_lt10_pct", "sum_geh_sq"), summary,
                meta)
    before = counts(profile.total_matrix())
    after = counts(res.matrix)
    write_table(d / "geh_detectors.csv", ("detector_id", "observed_vph", "before_vph", "before_geh", "after_vph",
                                          "after_geh"),
                ((k, observed[k], before[k], res.before.values[k], after[k], res.after.values[k])
                 for k in sorted(observed)), meta)
    return {"command": "calibrate demand", "geh_lt5_before": res.before.under5, "geh_lt5_after": res.after.under5,
            "sum_geh_sq_before": res.before.sum_sq, "sum_geh_sq_after": res.after.sum_sq,
            "files": [str(d / f) for f in ("od_adjusted.json", "demand_adjusted.json", "geh_summary.csv",
                                           "geh_detectors.csv")]}


def _split(val, allowed: Sequence[str], what: str) -> List[str]:
    items = val if isinstance(val, (list, tuple)) else [x.strip() for x in str(val).split(",") if x.strip()]
    bad = [x for x in items if x not in allowed]
    if bad or not items:
        raise InputError(f"unknown {what}: {', '.join(bad) or '(none)'}; expected {', '.join(allowed)}")
    return list(items)


def cmd_scenarios(inp: Inputs) -> Dict:
    net = inp.network()
    classes = inp.classes()
    demand = inp.demand()
    wanted = _split(inp.get("scenarios", ",".join(exp.SCENARIO_IDS)), exp.SCENARIO_IDS, "scenario")
    periods = _split(inp.get("periods", "off-peak"), exp.PERIODS, "period")
    demand = {p: _period_demand(demand, p) for p in periods}
    seed = int(inp.get("seed", 0))
    reps = int(inp.get("replications", 5))
    workers = int(inp.get("workers", 1))
    tune = bool(inp.get("tune_s4", False))
    eps = float(inp.get("epsilon", 1.5))
    cfg = _sim_config(inp, seed)
    first = [s for s in wanted if s != "S4" or not tune]
    if tune:
        first += [s for s in ("S0", "S3") if s not in first]
    first = [s for s in exp.SCENARIO_IDS if s in first]
    s4_speed = {}
    if inp.get("shuttle_speed") is not None:
        s4_speed = {p: float(inp.get("shuttle_speed")) for p in periods}
    report = exp.run_matrix(net, demand, first, periods, reps, seed, classes, cfg, s4_speed, workers)
    if tune:
        for p in periods:
            tr = exp.tune_shuttle_speed(net, demand[p], report.ratio(exp.AGGREGATED, "S0", p),
                                        report.ratio(exp.AGGREGATED, "S3", p), p, eps,
                                        float(inp.get("speed_step", 2.5)), exp.BASE_SHUTTLE_MPH,
                                        inp.get("max_speed"), reps, seed, classes, cfg, workers)
            report.tuned[p] = tr
            s4_speed[p] = tr.speed
        if "S4" in wanted:
            extra = exp.run_matrix(net, demand, ("S4",), periods, reps, seed, classes, cfg, s4_speed, workers)
            report.cells.update(extra.cells)
            report.raw += extra.raw
            report.speeds.update(extra.speeds)
    report.scenarios = [s for s in exp.SCENARIO_IDS if s in wanted]
    report.raw = [r for r in report.raw if r.scenario in wanted]
    d = inp.output_dir()
    meta = inp.meta("scenarios", seed, replications=reps, scenarios=",".join(report.scenarios),
                    periods=",".join(periods), duration_s=cfg.duration, warmup_s=cfg.warmup)
    files = exp.write_report(report, d, meta)
    return {"command": "scenarios", "files": [str(f) for f in files],
            "tuned_speed_mph": {p: t.speed for p, t in report.tuned.items()}}


def cmd_report(inp: Inputs) -> Dict:
    d = Path(inp.get("directory") or inp.output_dir())
    report = exp.read_report(d)
    if inp.get("format", "text") == "csv":
        text = "\n".join(",".join(str(x) for x in row) for row in exp.report_rows(report))
    else:
        text = exp.format_grid(report)
    print(text)
    return {"command": "report", "directory": str(d)}


# -- parser --------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, demand: bool = True):
    p.add_argument("--config", help="JSON manifest; flags override its entries")
    p.add_argument("--network", help="network JSON file or fixture:<corridor|single-lane|grid>")
    p.add_argument("--vehicles", help="vehicle parameter JSON (default: built-in classes)")
    if demand:
        p.add_argument("--demand", help="demand JSON file or fixture:<name>")
    p.add_argument("--seed", type=int)
    p.add_argument("--output", "-o", help=f"output directory (default ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")


def _sim_flags(p: argparse.ArgumentParser):
    p.add_argument("--duration", type=float, help="measured period in seconds")
    p.add_argument("--warmup", type=float, help="warmup in seconds")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="shuttlesim", description="Mixed-traffic shuttle simulation and calibration.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one replication and write trajectories, counts and traversals")
    _common(p)
    _sim_flags(p)
    p.add_argument("--scenario", choices=exp.SCENARIO_IDS)
    p.add_argument("--headway", type=float, help="shuttle headway in minutes (ignored with --scenario)")
    p.add_argument("--shuttle-speed", dest="shuttle_speed", type=float, help="shuttle speed cap in mph")
    p.add_argument("--period", choices=exp.PERIODS)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="calibrate vehicle parameters or demand")
    csub = p.add_subparsers(dest="stage", required=True)
    v = csub.add_parser("vehicles", help="grid search over vehicle parameters against trajectory logs")
    _common(v, demand=False)
    v.add_argument("--trajectories", nargs="+", help="trajectory log files or directories")
    v.add_argument("--grid", help="JSON object (or file) mapping parameter -> candidate values")
    v.add_argument("--class", dest="vehicle_class", choices=("hdv", "shuttle"))
    v.add_argument("--segments", help="JSON file mapping segment id -> section list (default: segment groups)")
    v.add_argument("--replications", type=int)
    v.set_defaults(func=cmd_calibrate_vehicles)
    dm = csub.add_parser("demand", help="adjust the OD matrix to observed detector counts")
    _common(dm)
    dm.add_argument("--detectors", help="observed counts CSV (detector_id, bin, count)")
    dm.add_argument("--period", choices=exp.PERIODS)
    dm.add_argument("--bound", type=float, help="max relative change per OD cell (default 0.5)")
    dm.add_argument("--iterations", type=int)
    dm.add_argument("--penalty", type=float)
    dm.set_defaults(func=cmd_calibrate_demand)

    p = sub.add_parser("scenarios", help="run the scenario matrix and write the metrics report")
    _common(p)
    _sim_flags(p)
    p.add_argument("--scenarios", help="comma-separated subset of S0,S1,S2,S3,S4")
    p.add_argument("--periods", help="comma-separated subset of off-peak,peak")
    p.add_argument("--replications", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--tune-s4", dest="tune_s4", action="store_true", default=None)
    p.add_argument("--epsilon", type=float, help="S4 tuning tolerance in percentage points (default 1.5)")
    p.add_argument("--speed-step", dest="speed_step", type=float, help="S4 speed increment in mph (default 2.5)")
    p.add_argument("--max-speed", dest="max_speed", type=float, help="S4 speed cap in mph")
    p.add_argument("--shuttle-speed", dest="shuttle_speed", type=float, help="fixed S4 speed in mph (no tuning)")
    p.set_defaults(func=cmd_scenarios)

    p = sub.add_parser("report", help="print a metrics report written by 'scenarios'")
    p.add_argument("directory", nargs="?", help="report directory (default: output directory)")
    p.add_argument("--format", choices=("text", "csv"))
    p.add_argument("--output", "-o", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_report)
    return ap


def _error_record(exc: BaseException) -> Dict:
    rec = {"error": type(exc).__name__, "message": str(exc)}
    path = getattr(exc, "path", None) or getattr(exc, "filename", None)
    if path:
        rec["path"] = str(path)
    return rec


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        result = args.func(Inputs(args))
    except Exception as exc:  # reported as a machine-readable record
        print(json.dumps(_error_record(exc)), file=sys.stderr)
        return 1
    if args.command != "report":
        print(json.dumps(result, default=float))
    return 0


if __name__ == "__main__":
    sys.exit(main())
