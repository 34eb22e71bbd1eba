import json

import pytest
from hypothesis import given, strategies as st

from shuttlesim.network import (Network, NetworkError, Section, SegmentGroup, SignalPlan, Turn, load_network,
                                network_from_dict, path_ideal_time, save_network, signal_state)
from shuttlesim.units import MPH


def two_sections():
    return {
        "units": {"length": "m", "speed": "mps"},
        "sections": [
            {"id": "a", "from": "n0", "to": "n1", "length": 100, "lanes": 1, "speed_limit": 10},
            {"id": "b", "from": "n1", "to": "n2", "length": 200, "lanes": 2, "speed_limit": 15},
        ],
        "turns": [{"from": "a", "to": "b"}],
    }


def test_minimal_network_loads(tmp_path):
    p = tmp_path / "net.json"
    p.write_text(json.dumps(two_sections()))
    net = load_network(p)
    assert set(net.sections) == {"a", "b"}
    assert net.successors("a") == ["b"]
    assert net.sections["b"].lane_count == 2


def test_route_skipping_a_turn_is_rejected():
    doc = two_sections()
    doc["sections"].append({"id": "c", "from": "n2", "to": "n3", "length": 50, "lanes": 1, "speed_limit": 10})
    doc["transit_routes"] = [{"id": "r", "sections": ["a", "b", "c"]}]
    with pytest.raises(NetworkError, match="route not connected"):
        network_from_dict(doc)


@pytest.mark.parametrize("mutate, msg", [
    (lambda d: d["sections"][0].update(length=0), "length"),
    (lambda d: d["sections"][0].update(lanes=0), "lane_count"),
    (lambda d: d["turns"].append({"from": "a", "to": "zz"}), "unknown section"),
    (lambda d: d["turns"].append({"from": "b", "to": "a"}), "share a node"),
    (lambda d: d["turns"][0].update(control="signal", phase=0), "missing phase"),
    (lambda d: d.update(detectors=[{"id": "d", "section": "a", "offset": 150}]), "offset outside"),
])
def test_invalid_documents(mutate, msg):
    doc = two_sections()
    mutate(doc)
    with pytest.raises(NetworkError, match=msg):
        network_from_dict(doc)


def test_unit_conversion_to_si():
    doc = two_sections()
    doc["units"] = {"length": "ft", "speed": "mph"}
    net = network_from_dict(doc)
    assert net.sections["a"].length == pytest.approx(30.48)
    assert net.sections["a"].speed_limit == pytest.approx(10 * MPH)


def test_corridor_fixture_shape(corridor):
    assert len(corridor.transit_routes) == 3
    roads = [s for s in corridor.sections if s.startswith("R")]
    assert len(roads) == 22
    assert set(corridor.segment_groups) == {"R1EW", "R1WE", "R3NS", "R3SN", "R6EW", "R6WE"}


def test_save_load_round_trip(corridor, tmp_path):
    p = tmp_path / "corridor.json"
    save_network(corridor, p)
    again = load_network(p)
    assert again.to_dict() == corridor.to_dict()


@pytest.mark.parametrize("t, state", [(15, "green"), (75, "green"), (30, "red"), (0, "green"), (59.9, "red")])
def test_signal_state(t, state):
    plan = SignalPlan("n", 60.0, ((0.0, 30.0),))
    assert signal_state(plan, t)[0] == state


def test_wrapping_phase():
    plan = SignalPlan("n", 60.0, ((50.0, 10.0),))
    assert plan.is_green(0, 55) and plan.is_green(0, 5) and not plan.is_green(0, 30)


@given(t=st.integers(0, 800_000).map(lambda x: x / 8), k=st.integers(0, 100))
def test_signal_is_periodic(t, k):
    # eighths of a second are exact in binary, so the modulo is exact too
    plan = SignalPlan("n", 90.0, ((0.0, 40.0), (45.0, 85.0)), offset=7.0)
    assert signal_state(plan, t) == signal_state(plan, t + k * 90.0)


def _one_section(length, limit):
    return Network({"s": Section("s", length, 1, limit, "n0", "n1")}, [])


def test_ideal_time_hdv():
    net = _one_section(402.3, 25 * MPH)
    assert path_ideal_time(net, ["s"]) == pytest.approx(402.3 / (25 * MPH))
    assert path_ideal_time(net, ["s"]) == pytest.approx(36.0, abs=0.05)


def test_ideal_time_shuttle_cap():
    net = _one_section(402.3, 25 * MPH)
    t = path_ideal_time(net, ["s"], lambda lim: min(lim, 9.5 * MPH))
    assert t == pytest.approx(94.7, abs=0.05)


def test_ideal_time_empty_group():
    net = _one_section(100.0, 10.0)
    assert path_ideal_time(net, SegmentGroup("g", ())) == 0.0


@given(st.lists(st.floats(1.0, 2000.0), min_size=1, max_size=6), st.floats(1.0, 40.0))
def test_ideal_time_is_additive(lengths, limit):
    secs = {f"s{i}": Section(f"s{i}", L, 1, limit, f"n{i}", f"n{i + 1}") for i, L in enumerate(lengths)}
    turns = [Turn(f"s{i}", f"s{i + 1}") for i in range(len(lengths) - 1)]
    net = Network(secs, turns)
    assert path_ideal_time(net, list(secs)) == pytest.approx(sum(lengths) / limit)
