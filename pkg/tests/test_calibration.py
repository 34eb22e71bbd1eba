import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shuttlesim.behavior import HDV, SHUTTLE
from shuttlesim.calibration import (CalibrationError, OdAdjustment, ParamGrid, TrajectoryLog, adjust_od,
                                    apply_params, assignment_counts, geh, geh_summary, grid_search_vehicle_params,
                                    log_from_output, mape, read_log, route_cases, segment_travel_times,
                                    simulate_cases, validate_following, write_log)
from shuttlesim.demand import OdMatrix
from shuttlesim.engine import ScriptedTrip, SimConfig, run
from shuttlesim.fixtures import GRID_CENTROIDS, grid_od

EB = ("EB1", "EB2", "EB3")
SEGS = {"EB": EB, "EB2": ("EB2",)}


def constant_log(speed, n, t0=0.0, excluded=()):
    t = t0 + np.arange(n, dtype=float)
    x = speed * np.arange(n, dtype=float)
    sec = [EB[min(int(v // 600), 2)] for v in x]
    off = [v - 600 * EB.index(s) for v, s in zip(x, sec)]
    return TrajectoryLog("hdv", "shuttle", "free", EB, t, sec, off, np.full(n, speed), tuple(excluded))


def test_constant_speed_travel_time(single_lane):
    tab = segment_travel_times([constant_log(10.0, 200)], SEGS, single_lane)
    assert tab.get("EB", "free") == pytest.approx(180.0)
    assert tab.get("EB2", "free") == pytest.approx(60.0)


def test_interpolates_between_samples(single_lane):
    # 7 m/s: the 600 m boundary falls between the 85th and 86th samples
    tab = segment_travel_times([constant_log(7.0, 300)], {"EB2": ("EB2",)}, single_lane)
    assert tab.get("EB2", "free") == pytest.approx(600.0 / 7.0)


def test_mean_over_trips(single_lane):
    tab = segment_travel_times([constant_log(10.0, 200), constant_log(12.0, 200, 50.0)], SEGS, single_lane)
    assert tab.get("EB", "free") == pytest.approx((180.0 + 150.0) / 2)
    assert tab.observations[("EB", "free")].trips == 2


def test_excluded_interval_is_subtracted(single_lane):
    tab = segment_travel_times([constant_log(10.0, 200, excluded=[(70.0, 100.0)])], SEGS, single_lane)
    assert tab.get("EB", "free") == pytest.approx(150.0)
    assert tab.get("EB2", "free") == pytest.approx(30.0)


def test_partial_trip_is_missing(single_lane):
    tab = segment_travel_times([constant_log(10.0, 100)], SEGS, single_lane)
    assert tab.get("EB", "free") is None and ("EB", "free") in tab.missing
    assert tab.get("EB2", "free") is None


def test_log_validation():
    with pytest.raises(CalibrationError):
        TrajectoryLog("hdv", "r", "free", EB, [0, 2, 4], ["EB1"] * 3, [0, 1, 2], [0, 0, 0])
    with pytest.raises(CalibrationError):
        TrajectoryLog("shuttle", "r", "free", EB, [0, 1], ["EB1"] * 2, [0, 1], [0, 0])
    with pytest.raises(CalibrationError):
        TrajectoryLog("hdv", "r", "parked", EB, [0, 1], ["EB1"] * 2, [0, 1], [0, 0])


def test_log_round_trip(tmp_path):
    lg = constant_log(10.0, 20, excluded=[(3.0, 5.5)])
    write_log(lg, tmp_path / "log.csv")
    back = read_log(tmp_path / "log.csv")
    assert back.path == lg.path and back.excluded == lg.excluded and back.condition == "free"
    assert np.allclose(back.t, lg.t) and np.allclose(back.offset, lg.offset) and back.section == lg.section


def test_simulated_log_matches_record(single_lane):
    out = run(SimConfig(duration=400, warmup=0), single_lane, trips=[ScriptedTrip("hdv", EB, 2.5)])
    lg = log_from_output(out, "x0", "free")
    rec = out.vehicles[0]
    tab = segment_travel_times([lg], {"EB": EB}, single_lane)
    assert tab.get("EB", "free") == pytest.approx(rec.exited - rec.entered, abs=1e-6)


def test_mape_examples():
    assert mape([100, 200], [110, 180]) == pytest.approx(10.0)
    assert mape([50], [50]) == 0.0
    with pytest.raises(ValueError):
        mape([0, 1], [1, 1])
    with pytest.raises(ValueError):
        mape([1, 2], [1])


def test_following_validation_skips_missing_segment():
    obs = {"1": 59.0, "3": 201.0, "4": 90.0}
    v = validate_following(obs, {"1": 38.7, "3": 187.7, "4": None})
    assert v.ape["4"] is None
    assert v.ape["1"] == pytest.approx(100 * 20.3 / 59)
    assert v.mape == pytest.approx((100 * 20.3 / 59 + 100 * 13.3 / 201) / 2)


def test_validation_rows_with_exact_inputs():
    # rows 1 and 3 of the route 1 validation table
    assert 100 * abs(59 - 38.7) / 59 == pytest.approx(34.4, abs=0.05)
    v = validate_following({"1": 59, "3": 201}, {"1": 38.7, "3": 187.7})
    assert v.ape["1"] == pytest.approx(34.4, abs=0.05)
    assert v.ape["3"] == pytest.approx(6.6, abs=0.05)


def test_geh_values():
    assert geh(110, 100) == pytest.approx(math.sqrt(2 * 100 / 210))
    assert geh(110, 100) == pytest.approx(0.9759, abs=1e-4)
    assert geh(0, 0) == 0.0
    assert geh(0, 50) == pytest.approx(10.0)
    with pytest.raises(ValueError):
        geh(-1, 3)


@given(st.floats(0, 1e5), st.floats(0, 1e5))
def test_geh_symmetric_and_zero_on_match(a, b):
    assert geh(a, b) == pytest.approx(geh(b, a))
    assert geh(a, a) == 0.0


def test_geh_summary():
    s = geh_summary({"a": 100, "b": 160, "c": 0}, {"a": 100, "b": 100, "c": 80})
    assert s.values["a"] == 0.0
    assert s.under5 == pytest.approx(1 / 3)
    assert s.under10 == pytest.approx(2 / 3)
    assert s.sum_sq == pytest.approx(2 * 3600 / 260 + 160.0)


def test_param_grid_validation():
    with pytest.raises(CalibrationError):
        ParamGrid("hdv", {})
    with pytest.raises(CalibrationError):
        ParamGrid("hdv", {"max_accel": ()})
    with pytest.raises(CalibrationError):
        ParamGrid("hdv", {"max_accel": (50.0,)})
    with pytest.raises(CalibrationError):
        ParamGrid("hdv", {"colour": (1.0,)})
    with pytest.raises(CalibrationError):
        ParamGrid("truck", {"max_accel": (1.0,)})
    g = ParamGrid("hdv", {"max_accel": (2, 3), "speed_acceptance": (1.0, 1.1, 1.2)})
    assert len(g) == 6 and len(list(g.points())) == 6


def test_apply_params_sets_mean_and_widens():
    p = apply_params(HDV, {"max_accel": 9.0 if HDV.max_accel.max < 9.0 else HDV.max_accel.max, "max_speed": 20.0})
    assert p.max_accel.mean == p.max_accel.max and p.max_speed == 20.0
    q = apply_params(HDV, {"speed_acceptance": 1.05})
    assert q.speed_acceptance.mean == 1.05 and q.speed_acceptance.min <= 1.05 <= q.speed_acceptance.max


def test_route_cases(single_lane):
    cases = route_cases(single_lane, "shuttle")
    assert [c.condition for c in cases] == ["shuttle", "free", "following-shuttle", "free", "following-shuttle"]
    assert cases[1].path == EB and cases[3].path == ("WB1", "WB2", "WB3")


def _observed(net, planted, conds=("free",)):
    cases = route_cases(net, "shuttle")
    logs = simulate_cases(net, {"hdv": planted, "shuttle": SHUTTLE}, cases, 2, seed=9, conditions=conds)
    segs = {"EB": EB, "WB": ("WB1", "WB2", "WB3")}
    return cases, segs, segment_travel_times(logs, segs, net)


def test_single_point_grid(single_lane):
    cases, segs, obs = _observed(single_lane, HDV)
    res = grid_search_vehicle_params(ParamGrid("hdv", {"speed_acceptance": (HDV.speed_acceptance.mean,)}),
                                     single_lane, obs, segs, cases, replications=2, seed=9)
    assert len(res.table) == 1 and res.best_mape < 1e-9


def test_coarse_grid_picks_nearest(single_lane):
    planted = apply_params(HDV, {"speed_acceptance": 1.1})
    cases, segs, obs = _observed(single_lane, planted)
    grid = ParamGrid("hdv", {"speed_acceptance": (0.9, 1.0, 1.08, 1.2)})
    res = grid_search_vehicle_params(grid, single_lane, obs, segs, cases, replications=2, seed=9)
    assert res.best == {"speed_acceptance": 1.08}
    assert res.best_mape < min(s.mape["free"] for s in res.table if s.params != res.best)


def test_missing_calibration_condition(single_lane):
    cases, segs, obs = _observed(single_lane, HDV)
    with pytest.raises(CalibrationError):
        grid_search_vehicle_params(ParamGrid("shuttle", {"max_accel": (1.0,)}), single_lane, obs, segs, cases)


# -- OD adjustment ---------------------------------------------------------------

def linear_counts(matrix):
    # two detectors: one sees every trip, the other only the A->B cell
    return {"all": matrix.total(), "ab": matrix["A", "B"]}


def test_adjust_od_one_cell():
    seed = OdMatrix(("A", "B"), [[0, 100], [0, 0]])
    res = adjust_od(seed, {"all": 130.0, "ab": 130.0}, linear_counts, penalty=0.0, iterations=300)
    assert res.matrix["A", "B"] == pytest.approx(130.0, rel=0.01)
    assert res.after.sum_sq < res.before.sum_sq


def test_adjust_od_respects_bounds():
    seed = OdMatrix(("A", "B"), [[0, 100], [0, 0]])
    res = adjust_od(seed, {"all": 400.0, "ab": 400.0}, linear_counts, bound=0.5, penalty=0.0)
    assert res.matrix["A", "B"] <= 150.0 + 1e-9


def test_adjust_od_already_matched():
    seed = OdMatrix(("A", "B"), [[0, 100], [40, 0]])
    obs = linear_counts(seed)
    res = adjust_od(seed, obs, linear_counts)
    assert np.array_equal(res.matrix.trips, seed.trips) and res.accepted == 0


def test_adjust_od_objective_never_rises(grid):
    counts = assignment_counts(grid)
    observed = counts(grid_od())
    rng = np.random.default_rng(1)
    seed = OdMatrix(GRID_CENTROIDS, grid_od().trips * rng.uniform(0.7, 1.3, (4, 4)))
    res = adjust_od(seed, observed, counts, iterations=60)
    assert np.all(np.diff(res.objective) < 0)
    # zero cells stay zero
    assert np.all(res.matrix.trips[seed.trips == 0] == 0)


def test_assignment_counts_conserve_trips(grid):
    counts = assignment_counts(grid)
    m = np.zeros((4, 4))
    m[0, 1] = 100.0  # NW -> NE: a single direct link
    c = counts(OdMatrix(GRID_CENTROIDS, m))
    assert c["D_NW-NE"] == pytest.approx(100.0, rel=1e-6)
    assert sum(c.values()) >= 100.0
