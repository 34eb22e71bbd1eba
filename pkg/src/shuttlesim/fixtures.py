"""Synthetic networks and demand used by the tests, demos and experiments.

``single_lane_corridor``
    Two one-lane 25 mph carriageways of three 600 m sections with a shuttle
    terminal loop at each end. No overtaking is possible, so a slow shuttle
    holds up every vehicle that catches it.

``corridor_fixture``
    A three-road corridor: a 25 mph local street (R1), a 20/15 mph connector
    (R3) and a two-lane 35 mph arterial (R6) with two fixed-time signals, a
    stop-controlled side street and a signalized side street. The 22 road
    sections carry three out-and-back shuttle routes (route1 on R1, route3
    on R3, route6 on R6) with a terminal loop and a stop at each end.

``grid_fixture``
    A 2 x 2 grid with a centroid at each corner and a detector on every
    section, used for OD adjustment.
"""

from __future__ import annotations

from typing import Dict, List, Tuple

import numpy as np

from .demand import DemandProfile, OdMatrix
from .network import (Centroid, Detector, Network, SegmentGroup, Section, SignalPlan, TransitRoute,
                      TransitStop, Turn)
from .units import MPH


def _sec(sid, a, b, length, lanes, mph):
    return Section(sid, float(length), lanes, mph * MPH, a, b)


# -- single-lane corridor ----------------------------------------------------

def single_lane_corridor(section_length: float = 600.0, n_sections: int = 3, speed_mph: float = 25.0,
                         dwell: float = 20.0) -> Network:
    nodes = [f"N{i}" for i in range(n_sections + 1)]
    sections: Dict[str, Section] = {}
    turns: List[Turn] = []
    eb = [f"EB{i + 1}" for i in range(n_sections)]
    wb = [f"WB{i + 1}" for i in range(n_sections)]
    for i in range(n_sections):
        sections[eb[i]] = _sec(eb[i], nodes[i], nodes[i + 1], section_length, 1, speed_mph)
        sections[wb[i]] = _sec(wb[i], nodes[n_sections - i], nodes[n_sections - i - 1], section_length, 1, speed_mph)
    for i in range(n_sections - 1):
        turns.append(Turn(eb[i], eb[i + 1]))
        turns.append(Turn(wb[i], wb[i + 1]))
    west, east = nodes[0], nodes[-1]
    sections["TW"] = _sec("TW", west, west, 60.0, 1, 15.0)
    sections["TE"] = _sec("TE", east, east, 60.0, 1, 15.0)
    turns += [Turn("TW", eb[0], transit_only=True), Turn(eb[-1], "TE", transit_only=True),
              Turn("TE", wb[0], transit_only=True)]
    detectors = {}
    for s in eb + wb:
        detectors[f"D_{s}"] = Detector(f"D_{s}", s, section_length / 2)
    centroids = {
        "W": Centroid("W", "external", ((eb[0], "out"), (wb[-1], "in"))),
        "E": Centroid("E", "external", ((wb[0], "out"), (eb[-1], "in"))),
    }
    route = TransitRoute("shuttle", tuple(["TW"] + eb + ["TE"] + wb),
                         (TransitStop("TW", 30.0, dwell), TransitStop("TE", 30.0, dwell)))
    groups = {"EB": SegmentGroup("EB", tuple(eb)), "WB": SegmentGroup("WB", tuple(wb))}
    return Network(sections, turns, {}, detectors, centroids, {"shuttle": route}, groups)


def single_lane_demand(per_direction: float = 250.0, period: float = 3600.0, interval: float = 900.0) -> DemandProfile:
    m = OdMatrix(("W", "E"), np.array([[0.0, per_direction], [per_direction, 0.0]]) * period / 3600.0)
    return DemandProfile.uniform(m, period, interval)


# -- three-road corridor ---------------------------------------------------------

R1_LEN, R3_LEN, R6_LEN = 587.0, 614.0, 798.0

CORRIDOR_CENTROIDS = ("W1", "E1", "N", "S", "W6", "E6")


def _split_plan(node: str, offset: float = 0.0) -> SignalPlan:
    # eastbound, westbound and side-street approaches each get their own
    # phase with 3 s of all-red in between
    return SignalPlan(node, 70.0, ((0.0, 27.0), (30.0, 57.0), (60.0, 67.0)), offset)


def corridor_fixture() -> Network:
    S: Dict[str, Section] = {}

    def add(sid, a, b, length, lanes, mph):
        S[sid] = _sec(sid, a, b, length, lanes, mph)

    a = ["A0", "A1", "A2", "A3"]
    for i in range(3):
        add(f"R1E_{i + 1}", a[i], a[i + 1], R1_LEN, 1, 25)
        add(f"R1W_{i + 1}", a[3 - i], a[2 - i], R1_LEN, 1, 25)
    b = ["A3", "B1", "B2", "C4"]
    r3_speed = (20, 20, 15)
    for i in range(3):
        add(f"R3S_{i + 1}", b[i], b[i + 1], R3_LEN, 1, r3_speed[i])
        add(f"R3N_{i + 1}", b[3 - i], b[2 - i], R3_LEN, 1, r3_speed[2 - i])
    c = ["C0", "C1", "C2", "C3", "C4", "C5"]
    for i in range(5):
        add(f"R6E_{i + 1}", c[i], c[i + 1], R6_LEN, 2, 35)
        add(f"R6W_{i + 1}", c[5 - i], c[4 - i], R6_LEN, 2, 35)
    add("E1o", "A4", "A3", 150.0, 1, 25)
    add("E1i", "A3", "A4", 150.0, 1, 25)
    add("Nin", "N0", "A2", 300.0, 1, 25)
    add("Nout", "A2", "N0", 300.0, 1, 25)
    add("Sin", "S0", "C2", 300.0, 1, 25)
    add("Sout", "C2", "S0", 300.0, 1, 25)
    # shuttle terminal loops
    for loop, node in (("T1W", "A0"), ("T1E", "A3"), ("T3N", "A3"), ("T3S", "C4"), ("T6W", "C0"), ("T6E", "C5")):
        add(loop, node, node, 60.0, 1, 15)

    T: List[Turn] = []
    for d in ("R1E", "R1W", "R3S", "R3N"):
        for i in range(1, 3):
            T.append(Turn(f"{d}_{i}", f"{d}_{i + 1}"))
    for d in ("R6E", "R6W"):
        for i in range(1, 5):
            if (d, i) in (("R6E", 4), ("R6W", 1), ("R6E", 2), ("R6W", 3)):
                continue  # signalized, below
            T.append(Turn(f"{d}_{i}", f"{d}_{i + 1}"))
    # A2: side street N, stop controlled; left turns off R1 yield
    T += [Turn("R1E_2", "Nout", "yield"), Turn("R1W_1", "Nout"),
          Turn("Nin", "R1E_3", "stop"), Turn("Nin", "R1W_2", "stop")]
    # A3: R1 meets R3 and the east stub
    T += [Turn("R1E_3", "E1i"), Turn("R1E_3", "R3S_1"),
          Turn("E1o", "R1W_1"), Turn("E1o", "R3S_1", "yield"),
          Turn("R3N_3", "R1W_1", "stop"), Turn("R3N_3", "E1i", "stop")]
    # C2 (side street S) and C4 (R3): split-phase signals
    T += [Turn("R6E_2", "R6E_3", "signal", 0), Turn("R6E_2", "Sout", "signal", 0, from_lane=0),
          Turn("R6W_3", "R6W_4", "signal", 1), Turn("R6W_3", "Sout", "signal", 1, from_lane=1),
          Turn("Sin", "R6E_3", "signal", 2), Turn("Sin", "R6W_4", "signal", 2)]
    T += [Turn("R6E_4", "R6E_5", "signal", 0), Turn("R6E_4", "R3N_1", "signal", 0, from_lane=1),
          Turn("R6W_1", "R6W_2", "signal", 1), Turn("R6W_1", "R3N_1", "signal", 1, from_lane=0),
          Turn("R3S_3", "R6E_5", "signal", 2), Turn("R3S_3", "R6W_2", "signal", 2)]
    # shuttle terminal loops
    T += [Turn("R1W_3", "T1W", transit_only=True), Turn("T1W", "R1E_1", transit_only=True),
          Turn("R1E_3", "T1E", transit_only=True), Turn("T1E", "R1W_1", "yield", transit_only=True),
          Turn("R3N_3", "T3N", "stop", transit_only=True), Turn("T3N", "R3S_1", "yield", transit_only=True),
          Turn("R3S_3", "T3S", "signal", 2, transit_only=True), Turn("T3S", "R3N_1", "yield", transit_only=True),
          Turn("R6W_5", "T6W", transit_only=True, from_lane=0), Turn("T6W", "R6E_1", transit_only=True),
          Turn("R6E_5", "T6E", transit_only=True, from_lane=0), Turn("T6E", "R6W_1", transit_only=True)]
    signals = {"C2": _split_plan("C2", 20.0), "C4": _split_plan("C4", 0.0)}

    det = {}
    for sid, sec in S.items():
        if sid.startswith(("R1", "R3", "R6", "Nin", "Nout", "Sin", "Sout")):
            det[f"D_{sid}"] = Detector(f"D_{sid}", sid, sec.length / 2)
    cen = {
        "W1": Centroid("W1", "external", (("R1E_1", "out"), ("R1W_3", "in"))),
        "E1": Centroid("E1", "external", (("E1o", "out"), ("E1i", "in"))),
        "N": Centroid("N", "internal", (("Nin", "out"), ("Nout", "in"))),
        "S": Centroid("S", "internal", (("Sin", "out"), ("Sout", "in"))),
        "W6": Centroid("W6", "external", (("R6E_1", "out"), ("R6W_5", "in"))),
        "E6": Centroid("E6", "external", (("R6W_1", "out"), ("R6E_5", "in"))),
    }
    r1e = [f"R1E_{i}" for i in (1, 2, 3)]
    r1w = [f"R1W_{i}" for i in (1, 2, 3)]
    r3s = [f"R3S_{i}" for i in (1, 2, 3)]
    r3n = [f"R3N_{i}" for i in (1, 2, 3)]
    r6w = [f"R6W_{i}" for i in (2, 3, 4, 5)]
    r6e = [f"R6E_{i}" for i in (1, 2, 3, 4)]
    r6e_all = [f"R6E_{i}" for i in range(1, 6)]
    r6w_all = [f"R6W_{i}" for i in range(1, 6)]
    routes = {}
    for rid, out_loop, back_loop, there, back in (("route1", "T1W", "T1E", r1e, r1w),
                                                  ("route3", "T3N", "T3S", r3s, r3n),
                                                  ("route6", "T6W", "T6E", r6e_all, r6w_all)):
        routes[rid] = TransitRoute(rid, tuple([out_loop] + there + [back_loop] + back),
                                   (TransitStop(out_loop, 30.0), TransitStop(back_loop, 30.0)))
    groups = {
        "R1EW": SegmentGroup("R1EW", tuple(r1w)), "R1WE": SegmentGroup("R1WE", tuple(r1e)),
        "R3NS": SegmentGroup("R3NS", tuple(r3s)), "R3SN": SegmentGroup("R3SN", tuple(r3n)),
        "R6EW": SegmentGroup("R6EW", tuple(r6w)), "R6WE": SegmentGroup("R6WE", tuple(r6e)),
    }
    return Network(S, T, signals, det, cen, routes, groups)


# hourly off-peak trips between corridor centroids
_CORRIDOR_OD = {
    ("W1", "E1"): 90, ("E1", "W1"): 90,
    ("W6", "E6"): 250, ("E6", "W6"): 250,
    ("W1", "W6"): 50, ("W6", "W1"): 50,
    ("E1", "E6"): 40, ("E6", "E1"): 40,
    ("N", "S"): 25, ("S", "N"): 25,
    ("N", "E1"): 25, ("E1", "N"): 25,
    ("S", "E6"): 30, ("W6", "S"): 30,
}

PEAK_FACTOR = 1.3


def corridor_od(period: str = "off-peak") -> OdMatrix:
    idx = {c: i for i, c in enumerate(CORRIDOR_CENTROIDS)}
    m = np.zeros((len(idx), len(idx)))
    for (o, d), q in _CORRIDOR_OD.items():
        m[idx[o], idx[d]] = q
    if period == "peak":
        m *= PEAK_FACTOR
    elif period != "off-peak":
        raise ValueError(f"unknown period {period!r}")
    return OdMatrix(CORRIDOR_CENTROIDS, m)


def corridor_demand(period: str = "off-peak", interval: float = 900.0) -> DemandProfile:
    return DemandProfile.uniform(corridor_od(period), 3600.0, interval)


# -- grid -------------------------------------------------------------------

GRID_CENTROIDS = ("NW", "NE", "SW", "SE")


def grid_fixture(length: float = 400.0, speed_mph: float = 30.0) -> Network:
    """Nodes NW, NE, SW, SE joined by two-way one-lane sections; each node
    hosts a centroid whose connectors are short stubs."""
    S: Dict[str, Section] = {}
    T: List[Turn] = []
    links = [("NW", "NE"), ("SW", "SE"), ("NW", "SW"), ("NE", "SE")]
    for a, b in links:
        for x, y in ((a, b), (b, a)):
            S[f"{x}-{y}"] = _sec(f"{x}-{y}", x, y, length, 1, speed_mph)
    cen = {}
    for n in GRID_CENTROIDS:
        S[f"{n}o"] = _sec(f"{n}o", f"{n}c", n, 100.0, 1, speed_mph)
        S[f"{n}i"] = _sec(f"{n}i", n, f"{n}c", 100.0, 1, speed_mph)
        cen[n] = Centroid(n, "external", ((f"{n}o", "out"), (f"{n}i", "in")))
    for sid, s in list(S.items()):
        for tid, t in S.items():
            if s.downstream_node == t.upstream_node and t.downstream_node != s.upstream_node:
                T.append(Turn(sid, tid))
    det = {f"D_{s}": Detector(f"D_{s}", s, sec.length / 2) for s, sec in S.items() if "-" in s}
    return Network(S, T, {}, det, cen)


def grid_od(scale: float = 1.0) -> OdMatrix:
    m = np.array([
        [0, 120, 90, 60],
        [100, 0, 50, 110],
        [80, 70, 0, 130],
        [50, 90, 120, 0],
    ], dtype=float) * scale
    return OdMatrix(GRID_CENTROIDS, m)
