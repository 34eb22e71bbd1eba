import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from shuttlesim.behavior import (FRESH_GAP, HDV, PATIENT_GAP, SHUTTLE, Follower, Leader, LaneOption, ParamDist,
                                 assumed_leader_decel, car_following_speed, desired_speed, gipps_accel_component,
                                 gipps_brake_component, lane_change_decision, load_vehicle_params, mean_driver,
                                 required_gap, safe_speed, sample_driver, save_vehicle_params, yield_gap_accept)
from shuttlesim.units import MPH

LIMIT = 11.18


def test_shuttle_sensitivity_within_bounds():
    rng = np.random.default_rng(0)
    xs = [SHUTTLE.sensitivity.sample(rng) for _ in range(2000)]
    assert min(xs) >= 0.3 and max(xs) <= 0.9


def test_fixed_distribution_is_exact():
    rng = np.random.default_rng(0)
    assert all(HDV.sensitivity.sample(rng) == 1.0 for _ in range(100))


def test_truncated_normal_mean_matches_density():
    d = HDV.speed_acceptance
    a, b = (d.min - d.mean) / d.dev, (d.max - d.mean) / d.dev
    oracle = stats.truncnorm.mean(a, b, loc=d.mean, scale=d.dev)
    rng = np.random.default_rng(1)
    xs = np.array([d.sample(rng) for _ in range(100_000)])
    assert abs(xs.mean() - oracle) < 0.02
    assert xs.min() >= d.min and xs.max() <= d.max


def test_param_dist_validation():
    with pytest.raises(ValueError):
        ParamDist(1.0, 0.5, 0.1, 2.0)
    with pytest.raises(ValueError):
        ParamDist(0.0, 0.5, -0.1, 2.0)


def _draw(cls=HDV, **kw):
    from dataclasses import replace
    return replace(mean_driver(cls), **kw)


@pytest.mark.parametrize("acc, expected", [(1.2, 1.2 * LIMIT), (1.0, LIMIT)])
def test_desired_speed_hdv(acc, expected):
    assert desired_speed(_draw(speed_acceptance=acc), LIMIT) == pytest.approx(expected)


def test_desired_speed_shuttle_cap():
    assert desired_speed(mean_driver(SHUTTLE), LIMIT) == pytest.approx(9.5 * MPH)
    assert 9.5 * MPH == pytest.approx(4.25, abs=0.005)


def test_accel_component_from_rest():
    # 2.5 * 2 * 0.8 * 1 * sqrt(0.025)
    assert gipps_accel_component(0.0, 10.0, 2.0, 0.8) == pytest.approx(0.6325, abs=1e-4)


def test_accel_component_at_desired_speed():
    assert gipps_accel_component(10.0, 10.0, 3.0, 0.8) == 10.0


def test_accel_component_hand_value():
    # 5 + 2.5*3*0.1*0.5*sqrt(0.525)
    assert gipps_accel_component(5.0, 10.0, 3.0, 0.1) == pytest.approx(5.2717, abs=1e-4)


def test_brake_component_no_room():
    assert gipps_brake_component(0.0, 0.0, 0.0, 3.0, 3.0, 0.8) == 0.0


def test_brake_component_hand_value():
    # -D*tau/2 + sqrt(D^2 tau^2 / 4 + D * 2 * gap) = -2 + sqrt(104)
    u = gipps_brake_component(0.0, 0.0, 10.0, 5.0, 5.0, 0.8)
    assert u == pytest.approx(-2.0 + math.sqrt(104.0), abs=1e-9)
    assert u == pytest.approx(8.198, abs=1e-3)


def _stop_point(v0, u, D, tau, dt=1e-3):
    """Distance covered ramping linearly from v0 to u over tau, then braking at D."""
    x, v, t = 0.0, v0, 0.0
    while t < tau - 1e-12:
        vn = v0 + (u - v0) * min((t + dt) / tau, 1.0)
        x += 0.5 * (v + vn) * dt
        v, t = vn, t + dt
    return x + v * v / (2 * D)


def test_brake_component_hand_value_is_the_stopping_boundary():
    u = gipps_brake_component(0.0, 0.0, 10.0, 5.0, 5.0, 0.8)
    assert _stop_point(0.0, u, 5.0, 0.8) == pytest.approx(10.0, abs=1e-3)
    assert _stop_point(0.0, u * 1.01, 5.0, 0.8) > 10.0


def test_softer_assumed_leader_braking_allows_more_speed():
    # smaller assumed leader deceleration means a longer leader stop, so more room
    for vl in (2.0, 6.0, 12.0):
        hard = gipps_brake_component(8.0, vl, 15.0, 3.0, 6.0, 0.8)
        soft = gipps_brake_component(8.0, vl, 15.0, 3.0, 3.0, 0.8)
        assert soft > hard


def test_assumed_decel_floor():
    d = _draw(sensitivity=0.5, normal_decel=3.0)
    assert assumed_leader_decel(d, Leader(10.0, 5.0, 5.0)) == 3.0
    assert assumed_leader_decel(d, Leader(10.0, 5.0, 8.0)) == 4.0


@given(v=st.floats(0, 30), vl=st.floats(0, 30), gap=st.floats(0, 200), D=st.floats(0.5, 8), Dh=st.floats(0.5, 8),
       tau=st.floats(0.1, 2.0), extra=st.floats(0, 3))
def test_brake_component_non_negative_and_monotone_in_gap(v, vl, gap, D, Dh, tau, extra):
    u = gipps_brake_component(v, vl, gap, D, Dh, tau, extra)
    assert u >= 0.0
    assert gipps_brake_component(v, vl, gap + 1.0, D, Dh, tau, extra) >= u


def test_free_acceleration_increases_speed():
    d = mean_driver(HDV)
    assert car_following_speed(5.0, None, d, LIMIT, 0.8) > 5.0


@pytest.mark.parametrize("cls", [HDV, SHUTTLE])
def test_free_flow_converges_within_60s(cls):
    d = mean_driver(cls)
    V = desired_speed(d, LIMIT)
    v = 0.0
    for _ in range(600):
        v = car_following_speed(v, None, d, LIMIT, d.reaction_normal)
        assert v <= V + 1e-12
    assert v == pytest.approx(V, rel=1e-3)


def test_stopping_behind_stationary_leader():
    d = mean_driver(HDV)
    x, v, lead_rear = 0.0, 5.0, 2.0 + d.clearance
    speeds = []
    for _ in range(300):
        nv = car_following_speed(v, Leader(lead_rear - x, 0.0, 6.0), d, LIMIT, d.reaction_normal)
        x += 0.5 * (v + nv) * 0.1
        v = nv
        speeds.append(v)
        assert lead_rear - x >= 0.0
    assert all(b <= a + 1e-12 for a, b in zip(speeds, speeds[1:]))
    assert speeds[-1] == 0.0


def test_platoon_behind_shuttle_settles_at_shuttle_speed():
    d = mean_driver(HDV)
    vs = 9.5 * MPH
    xl, x, v = 100.0, 0.0, desired_speed(d, LIMIT)
    for _ in range(3000):
        nv = car_following_speed(v, Leader(xl - 4.75 - x, vs, 6.0), d, LIMIT, d.reaction_normal)
        x += 0.5 * (v + nv) * 0.1
        xl += vs * 0.1
        v = nv
        assert xl - 4.75 - x > 0
    assert v == pytest.approx(vs, abs=1e-3)


def test_lane_change_keep_without_target():
    d = mean_driver(HDV)
    assert not lane_change_decision(4.25, d, 4.25, None, "speed-gain")


def test_lane_change_overtakes_slow_shuttle():
    d = mean_driver(HDV)
    opt = LaneOption(None, None, desired_speed(d, LIMIT))
    assert lane_change_decision(4.25, d, 4.25, opt, "speed-gain")


def test_lane_change_refused_when_new_follower_too_close():
    d = mean_driver(HDV)
    fast = Follower(1.0, 15.0, mean_driver(HDV))
    opt = LaneOption(None, fast, desired_speed(d, LIMIT))
    assert not lane_change_decision(4.25, d, 4.25, opt, "speed-gain")
    # the oracle: the follower's safe speed is far below what normal braking allows
    assert safe_speed(15.0, Leader(1.0, 4.25, d.max_decel), fast.draw, 0.8) < 15.0 - fast.draw.normal_decel * 0.8


def test_unknown_motivation():
    with pytest.raises(ValueError):
        lane_change_decision(1.0, mean_driver(HDV), 1.0, LaneOption(None, None, 5.0), "boredom")


def test_yield_gap_thresholds():
    d = _draw(yield_time=10.0)
    assert yield_gap_accept(0.0, d, FRESH_GAP)
    assert not yield_gap_accept(0.0, d, FRESH_GAP - 0.1)
    assert yield_gap_accept(10.0, d, PATIENT_GAP)
    assert yield_gap_accept(5.0, d, 0.5 * (FRESH_GAP + PATIENT_GAP))
    assert not yield_gap_accept(5.0, d, 0.5 * (FRESH_GAP + PATIENT_GAP) - 0.01)


@given(w1=st.floats(0, 30), w2=st.floats(0, 30), yt=st.floats(0.1, 20))
def test_required_gap_never_grows_with_waiting(w1, w2, yt):
    lo, hi = sorted((w1, w2))
    assert required_gap(hi, yt) <= required_gap(lo, yt) + 1e-12
    assert PATIENT_GAP - 1e-12 <= required_gap(lo, yt) <= FRESH_GAP + 1e-12


def test_sample_driver_is_seeded():
    a = sample_driver(HDV, np.random.default_rng(5))
    b = sample_driver(HDV, np.random.default_rng(5))
    assert a == b


def test_vehicle_params_round_trip(tmp_path):
    p = tmp_path / "veh.json"
    save_vehicle_params({"hdv": HDV, "shuttle": SHUTTLE}, p)
    back = load_vehicle_params(p)
    assert back["hdv"] == HDV
    assert back["shuttle"].max_speed == pytest.approx(SHUTTLE.max_speed)
    assert back["shuttle"].sensitivity == SHUTTLE.sensitivity
