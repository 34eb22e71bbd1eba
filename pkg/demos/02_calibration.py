"""Calibrating cars and demand on synthetic data.

Run with ``python demos/02_calibration.py`` (about a minute). Part one
plants car parameters, simulates field trips with them and recovers the
planted values by grid search. Part two perturbs a 4-centroid OD matrix and
adjusts it back to the detector counts.
"""

# %% Setup
from dataclasses import replace

import numpy as np

from shuttlesim.behavior import HDV, SHUTTLE, ParamDist, _DISTRIBUTED
from shuttlesim.calibration import (ParamGrid, adjust_od, apply_params, assignment_counts, grid_search_vehicle_params,
                                    route_cases, segment_travel_times, simulate_cases)
from shuttlesim.demand import OdMatrix
from shuttlesim.fixtures import GRID_CENTROIDS, corridor_fixture, grid_fixture, grid_od


def fixed(params):
    return replace(params, **{n: ParamDist.fixed(getattr(params, n).mean) for n in _DISTRIBUTED})


# %% Field trips with planted car parameters
net = corridor_fixture()
base = {"hdv": fixed(HDV), "shuttle": fixed(SHUTTLE)}
planted = {"speed_acceptance": 1.1, "max_accel": 3.5}
truth = dict(base, hdv=apply_params(base["hdv"], planted))
cases = [c for r in net.transit_routes for c in route_cases(net, r)]
segments = {g.name: g.sections for g in net.segment_groups.values()}
observed = segment_travel_times(simulate_cases(net, truth, cases, 1, seed=99), segments, net)
print("observed travel times (s):")
for (seg, cond), ob in sorted(observed.observations.items()):
    print(f"  {seg:5} {cond:18} {ob.travel_time:7.1f}")

# %% Grid search
grid = ParamGrid("hdv", {"speed_acceptance": (0.9, 1.0, 1.1, 1.2), "max_accel": (2.5, 3.5, 4.5)})
res = grid_search_vehicle_params(grid, net, observed, segments, cases, base, 1, seed=0)
print(f"\n{len(grid)} grid points; best {res.best} with free-flow MAPE {res.best_mape:.3f}%")
for score in sorted(res.table, key=lambda s: s.mape.get("free", np.inf))[:4]:
    print(f"  {score.params}  free {score.mape['free']:.2f}%  shuttle {score.mape['shuttle']:.2f}%")

# %% OD adjustment against detector counts
grid_net = grid_fixture()
counts = assignment_counts(grid_net)
target = grid_od(4.0)
detector_counts = counts(target)
seed = OdMatrix(GRID_CENTROIDS, target.trips * np.random.default_rng(0).uniform(0.6, 1.4, (4, 4)))
adj = adjust_od(seed, detector_counts, counts)
print(f"\nGEH < 5 on {adj.before.under5:.0%} of detectors before, {adj.after.under5:.0%} after")
print(f"sum of GEH^2: {adj.before.sum_sq:.1f} -> {adj.after.sum_sq:.2f} in {adj.accepted} accepted steps")
# Eight detectors cannot pin down twelve OD cells: the adjusted matrix
# reproduces the counts without necessarily matching every original cell.
print("largest remaining cell error:", f"{np.max(np.abs(adj.matrix.trips - target.trips)):.1f} trips")
