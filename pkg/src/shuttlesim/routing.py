"""Path enumeration, logit / C-logit route choice and iterative assignment.

Costs are normalized by the cheapest path of each OD pair before the scale
factor is applied, so the scale is unit-free.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from itertools import islice
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from .demand import DemandProfile
from .network import Network

log = logging.getLogger(__name__)

SATURATION_FLOW = 1800.0  # veh/h/lane


class NoPathError(ValueError):
    pass


@dataclass(frozen=True)
class RouteChoiceModel:
    kind: str = "logit"  # "logit" | "clogit"
    scale: float = 12.0
    beta: float = 0.1
    gamma: float = 1.0
    max_paths: int = 3
    fixed_fraction: float = 0.7

    def __post_init__(self):
        if self.kind not in ("logit", "clogit"):
            raise ValueError(f"unknown route choice model {self.kind!r}")
        if not 0 <= self.fixed_fraction <= 1:
            raise ValueError("fixed_fraction must be in [0, 1]")


OFF_PEAK_MODEL = RouteChoiceModel("logit", scale=12.0)
PEAK_MODEL = RouteChoiceModel("clogit", scale=12.0, beta=0.1, gamma=1.0)


@dataclass(frozen=True)
class CandidatePath:
    sections: Tuple[str, ...]
    cost: float


def _endpoints(network: Network, o: str, d: str) -> Tuple[List[str], List[str]]:
    if o in network.centroids:
        starts = network.centroids[o].origins
    else:
        starts = [o]
    if d in network.centroids:
        ends = network.centroids[d].destinations
    else:
        ends = [d]
    if not starts or not ends:
        raise NoPathError(f"no connectors for {o} -> {d}")
    return starts, ends


def section_graph(network: Network, cost: Mapping[str, float], transit: bool = False) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(network.sections)
    for t in network.turns:
        if t.transit_only and not transit:
            continue
        g.add_edge(t.from_section, t.to_section, weight=cost[t.to_section])
    return g


def k_shortest_paths(network: Network, o: str, d: str, k: int = 3,
                     cost: Optional[Mapping[str, float]] = None) -> List[CandidatePath]:
    """Up to ``k`` loopless section paths from ``o`` to ``d`` in
    non-decreasing cost order. ``o``/``d`` are centroid or section ids;
    ``cost`` defaults to free-flow section times."""
    if cost is None:
        cost = free_flow_costs(network)
    starts, ends = _endpoints(network, o, d)
    g = section_graph(network, cost)
    src, dst = ("__origin__",), ("__destination__",)
    for s in starts:
        g.add_edge(src, s, weight=cost[s])
    for e in ends:
        g.add_edge(e, dst, weight=0.0)
    try:
        gen = nx.shortest_simple_paths(g, src, dst, weight="weight")
        out = []
        for p in islice(gen, k):
            secs = tuple(p[1:-1])
            out.append(CandidatePath(secs, sum(cost[s] for s in secs)))
    except nx.NetworkXNoPath:
        raise NoPathError(f"destination {d} unreachable from {o}") from None
    return out


@dataclass
class PathSet:
    origin: str
    destination: str
    paths: List[Tuple[str, ...]]
    lengths: np.ndarray
    costs: np.ndarray
    probabilities: np.ndarray


def path_set(network: Network, o: str, d: str, model: RouteChoiceModel,
             cost: Optional[Mapping[str, float]] = None) -> PathSet:
    """Candidate paths for one OD pair with their choice probabilities."""
    cost = cost if cost is not None else free_flow_costs(network)
    cands = k_shortest_paths(network, o, d, model.max_paths, cost)
    paths = [c.sections for c in cands]
    costs = np.array([c.cost for c in cands])
    lengths = np.array([network.path_length(p) for p in paths])
    return PathSet(o, d, paths, lengths, costs, choice_probabilities(model, network, paths, costs))


def logit_probabilities(costs: Sequence[float], scale: float = 12.0) -> np.ndarray:
    c = np.asarray(costs, dtype=float)
    if c.size == 0:
        raise ValueError("need at least one path")
    if not scale > 0:
        raise ValueError("scale must be > 0")
    ref = c.min()
    if ref <= 0:
        ref = 1.0
    u = -scale * c / ref
    u -= u.max()
    w = np.exp(u)
    return w / w.sum()


def commonality_factors(lengths: Sequence[float], overlaps: np.ndarray, beta: float, gamma: float) -> np.ndarray:
    L = np.asarray(lengths, dtype=float)
    ov = np.asarray(overlaps, dtype=float)
    ratio = ov / np.sqrt(np.outer(L, L))
    return beta * np.log(np.sum(ratio ** gamma, axis=1))


def clogit_probabilities(lengths: Sequence[float], overlaps: np.ndarray, costs: Sequence[float],
                         scale: float = 12.0, beta: float = 0.1, gamma: float = 1.0) -> np.ndarray:
    """C-logit: logit utilities penalized by each path's commonality factor.
    ``overlaps[k, l]`` is the length shared by paths k and l (diagonal = own
    length)."""
    c = np.asarray(costs, dtype=float)
    if beta < 0:
        raise ValueError("beta must be >= 0")
    ref = c.min() if c.min() > 0 else 1.0
    u = -scale * c / ref
    if beta > 0:
        u = u - commonality_factors(lengths, overlaps, beta, gamma)
    u -= u.max()
    w = np.exp(u)
    return w / w.sum()


def path_overlaps(network: Network, paths: Sequence[Sequence[str]]) -> Tuple[np.ndarray, np.ndarray]:
    """Path lengths and the matrix of pairwise shared lengths."""
    sets = [set(p) for p in paths]
    n = len(paths)
    ov = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            ov[i, j] = ov[j, i] = sum(network.sections[s].length for s in sets[i] & sets[j])
    return np.diag(ov).copy(), ov


def choice_probabilities(model: RouteChoiceModel, network: Network, paths: Sequence[Sequence[str]],
                         costs: Sequence[float]) -> np.ndarray:
    if model.kind == "logit" or len(paths) == 1:
        return logit_probabilities(costs, model.scale)
    lengths, ov = path_overlaps(network, paths)
    return clogit_probabilities(lengths, ov, costs, model.scale, model.beta, model.gamma)


# -- analytic link costs ----------------------------------------------------

def _green_ratio(network: Network, section: str) -> Optional[Tuple[float, float]]:
    """(green fraction, cycle) for a section ending at a signal, else None."""
    sec = network.sections[section]
    plan = network.signals.get(sec.downstream_node)
    if plan is None:
        return None
    greens = []
    for t in network.turns_from(section):
        if t.control == "signal":
            a, b = plan.phases[t.phase]
            greens.append((b - a) % plan.cycle or plan.cycle)
    if not greens:
        return None
    return max(greens) / plan.cycle, plan.cycle


def free_flow_costs(network: Network) -> Dict[str, float]:
    return section_costs(network, {})


def section_costs(network: Network, flows: Mapping[str, float]) -> Dict[str, float]:
    """BPR travel time plus a uniform signal delay term; ``flows`` in veh/h."""
    out = {}
    for sid, sec in network.sections.items():
        t0 = sec.length / sec.speed_limit
        cap = SATURATION_FLOW * sec.lane_count
        gr = _green_ratio(network, sid)
        x = flows.get(sid, 0.0)
        if gr is not None:
            g, cycle = gr
            cap *= g
            sat = min(x / cap, 0.95)
            t0 += 0.5 * cycle * (1 - g) ** 2 / (1 - sat * g)
        out[sid] = t0 * (1.0 + 0.15 * (x / cap) ** 4)
    return out


@dataclass
class AssignmentPlan:
    """Per departure interval and OD pair: candidate paths and their shares."""

    interval: float
    intervals: List[Dict[Tuple[str, str], List[Tuple[Tuple[str, ...], float]]]]
    fixed_fraction: float = 0.7
    gap: float = 0.0
    iterations: int = 0
    converged: bool = True

    @property
    def en_route_fraction(self) -> float:
        return 1.0 - self.fixed_fraction

    def paths_for(self, k: int, o: str, d: str) -> List[Tuple[Tuple[str, ...], float]]:
        k = min(max(k, 0), len(self.intervals) - 1)
        return self.intervals[k].get((o, d), [])

    def to_records(self) -> List[dict]:
        rows = []
        for k, ods in enumerate(self.intervals):
            for (o, d), paths in ods.items():
                for i, (secs, share) in enumerate(paths):
                    rows.append({"interval": k, "origin": o, "destination": d, "path_index": i,
                                 "sections": list(secs), "share": share})
        return rows

    def to_dict(self) -> dict:
        return {"interval_s": self.interval, "fixed_fraction": self.fixed_fraction,
                "en_route_fraction": self.en_route_fraction, "gap": self.gap,
                "iterations": self.iterations, "converged": self.converged, "shares": self.to_records()}

    @classmethod
    def from_dict(cls, doc: dict) -> "AssignmentPlan":
        n = 1 + max((r["interval"] for r in doc["shares"]), default=0)
        intervals: List[dict] = [{} for _ in range(n)]
        for r in sorted(doc["shares"], key=lambda r: (r["interval"], r["path_index"])):
            intervals[r["interval"]].setdefault((r["origin"], r["destination"]), []).append(
                (tuple(r["sections"]), float(r["share"])))
        return cls(float(doc["interval_s"]), intervals, float(doc["fixed_fraction"]),
                   float(doc.get("gap", 0.0)), int(doc.get("iterations", 0)), bool(doc.get("converged", True)))

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))


CostFn = Callable[[Mapping[str, float]], Mapping[str, float]]


def iterate_assignment(network: Network, demand: DemandProfile, model: RouteChoiceModel = OFF_PEAK_MODEL,
                       max_iters: int = 50, tol: float = 1e-3, cost_fn: Optional[CostFn] = None) -> AssignmentPlan:
    """Method of successive averages between path shares and section costs,
    run separately for every departure interval.

    ``cost_fn`` maps section flows (veh/h) to section costs (s); the default
    is the analytic BPR/signal-delay approximation. Non-convergence is logged
    and flagged on the returned plan.
    """
    cost_fn = cost_fn or (lambda flows: section_costs(network, flows))
    costs = dict(cost_fn({}))
    intervals = []
    worst_gap, total_iters, converged = 0.0, 0, True
    for k in range(demand.n_intervals):
        ods = [(o, d, q * 3600.0 / demand.interval) for o, d, q in demand.slice(k).pairs()]
        pathsets = {}
        for o, d, _ in ods:
            pathsets[(o, d)] = [p.sections for p in k_shortest_paths(network, o, d, model.max_paths, costs)]
        shares = {}
        for o, d, _ in ods:
            ps = pathsets[(o, d)]
            shares[(o, d)] = choice_probabilities(model, network, ps, [sum(costs[s] for s in p) for p in ps])
        gap = 0.0
        it = 0
        for it in range(1, max_iters + 1):
            flows: Dict[str, float] = {}
            for o, d, q in ods:
                for p, s in zip(pathsets[(o, d)], shares[(o, d)]):
                    for sec in p:
                        flows[sec] = flows.get(sec, 0.0) + q * s
            costs = dict(cost_fn(flows))
            num = den = 0.0
            for o, d, q in ods:
                ps = pathsets[(o, d)]
                pc = np.array([sum(costs[s] for s in p) for p in ps])
                prob = choice_probabilities(model, network, ps, pc)
                cur = shares[(o, d)]
                num += q * float(np.sum(np.abs(prob - cur) * pc))
                den += q * float(np.sum(cur * pc))
                shares[(o, d)] = cur + (prob - cur) / (it + 1)
            gap = num / den if den > 0 else 0.0
            if gap < tol:
                break
        if gap >= tol:
            converged = False
            log.warning("assignment interval %d did not converge: gap %.4g after %d iterations", k, gap, it)
        worst_gap = max(worst_gap, gap)
        total_iters += it
        intervals.append({od: [(p, float(s)) for p, s in zip(pathsets[od], shares[od] / shares[od].sum())]
                          for od in pathsets})
    return AssignmentPlan(demand.interval, intervals, model.fixed_fraction, worst_gap, total_iters, converged)


def single_path_plan(paths: Mapping[Tuple[str, str], Sequence[str]], interval: float = 3600.0) -> AssignmentPlan:
    """A plan binding every OD pair to one given path."""
    return AssignmentPlan(interval, [{od: [(tuple(p), 1.0)] for od, p in paths.items()}], fixed_fraction=1.0)
