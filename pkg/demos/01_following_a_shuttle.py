"""A car catches a slow shuttle on a one-lane road.

Run with ``python demos/01_following_a_shuttle.py``. The script places a
9.5 mph shuttle and five cars on the single-lane corridor fixture and
prints how the platoon forms behind the shuttle.
"""

# %% Setup
import numpy as np

from shuttlesim.behavior import HDV, SHUTTLE, Leader, gipps_brake_component, mean_driver, safe_speed
from shuttlesim.engine import ScriptedTrip, SimConfig, run
from shuttlesim.fixtures import single_lane_corridor
from shuttlesim.units import mps_to_mph

net = single_lane_corridor()
eastbound = ("EB1", "EB2", "EB3")
car, shuttle = mean_driver(HDV), mean_driver(SHUTTLE)

# %% The braking-safe speed
# A car doing 25 mph with a 30 m gap to a shuttle doing 9.5 mph may keep at
# most this speed over its next reaction time.
v, vl = 11.18, 4.25
u = safe_speed(v, Leader(30.0, vl, shuttle.max_decel), car, car.reaction_normal)
print(f"safe speed behind the shuttle at 30 m: {u:.2f} m/s ({mps_to_mph(u):.1f} mph)")
for gap in (10.0, 20.0, 40.0, 80.0):
    print(f"  gap {gap:5.1f} m -> {gipps_brake_component(v, vl, gap, car.normal_decel, car.normal_decel, 0.8):5.2f} m/s")

# %% A platoon on the corridor
trips = [ScriptedTrip("shuttle", eastbound, 0.0, shuttle)]
trips += [ScriptedTrip("hdv", eastbound, 10.0 + 8.0 * i, car) for i in range(5)]
out = run(SimConfig(duration=600.0, warmup=0.0), net, trips=trips)

print("\nvehicle  entered   exited   travel time   mean speed")
for rec in out.vehicles:
    tt = rec.exited - rec.entered
    print(f"{rec.id:>7} {rec.entered:8.1f} {rec.exited:8.1f} {tt:11.1f} s {mps_to_mph(1800.0 / tt):9.1f} mph")

# %% Gaps inside the platoon at the end of EB2
tr = out.trajectories
t_probe = 200.0
rows = [(vid, off) for (t, vid, _, sec, off, _) in tr.rows() if t == t_probe and sec == "EB2"]
rows.sort(key=lambda r: -r[1])
print(f"\npositions on EB2 at t = {t_probe:.0f} s:")
for (a, xa), (b, xb) in zip(rows, rows[1:]):
    print(f"  {b} is {xa - xb - HDV.length:5.1f} m behind {a}")
print(f"\nsmallest net gap over the run: {out.min_gap:.2f} m")
print(f"speed-bound violations: {out.speed_violations}")
