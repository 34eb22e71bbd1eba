"""How shuttle headway and speed change car delay on a one-lane corridor.

Run with ``python demos/03_shuttle_scenarios.py`` (a few minutes on one
core). Runs S0 (no shuttle) to S3 (every 10 minutes) with five seeds, then
raises the shuttle speed until the delay ratio is back near S0.
"""

# %% Setup
from shuttlesim.experiments import AGGREGATED, format_grid, run_matrix, tune_shuttle_speed
from shuttlesim.fixtures import single_lane_corridor, single_lane_demand

net = single_lane_corridor()
demand = {"off-peak": single_lane_demand(250.0)}

# %% Scenario matrix
report = run_matrix(net, demand, ("S0", "S1", "S2", "S3"), replications=5, seed=0)
for sid in report.scenarios:
    print(f"{sid}: delay ratio {report.ratio(AGGREGATED, sid):5.2f}%   speed {report.speed(AGGREGATED, sid):5.2f} mph")

# %% Speed tuning for S4
s0 = report.ratio(AGGREGATED, "S0")
tuned = tune_shuttle_speed(net, demand["off-peak"], s0, report.ratio(AGGREGATED, "S3"), replications=5, seed=0)
for speed, ratio in tuned.attempts:
    print(f"  shuttle at {speed:4.1f} mph -> ratio {ratio:5.2f}%")
print(f"S4 speed {tuned.speed} mph brings the ratio to {tuned.ratio:.2f}% (S0 {s0:.2f}%)")
report.tuned["off-peak"] = tuned

# %% Report grid
print()
print(format_grid(report))
