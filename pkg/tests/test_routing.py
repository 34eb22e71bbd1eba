import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shuttlesim.demand import DemandProfile, OdMatrix
from shuttlesim.network import Centroid, Network, Section, Turn
from shuttlesim.routing import (NoPathError, RouteChoiceModel, clogit_probabilities, commonality_factors,
                                free_flow_costs, iterate_assignment, k_shortest_paths, logit_probabilities,
                                path_overlaps, path_set, single_path_plan)


def brute_force_paths(net, o, d, cost):
    """Every loopless section path between two centroids, by plain DFS."""
    starts, ends = net.centroids[o].origins, set(net.centroids[d].destinations)
    out = []

    def dfs(path):
        s = path[-1]
        if s in ends:
            out.append((sum(cost[x] for x in path), tuple(path)))
        for t in net.turns_from(s):
            if t.transit_only or t.to_section in path:
                continue
            dfs(path + [t.to_section])

    for s in starts:
        dfs([s])
    return sorted(out)


def test_two_equal_routes(grid):
    paths = k_shortest_paths(grid, "NW", "SE", k=3)
    assert len(paths) >= 2
    assert paths[0].cost == pytest.approx(paths[1].cost)
    assert {p.sections[1] for p in paths[:2]} == {"NW-NE", "NW-SW"}


def test_k1_is_the_shortest_path(corridor):
    cost = free_flow_costs(corridor)
    best = brute_force_paths(corridor, "W1", "E1", cost)[0]
    got = k_shortest_paths(corridor, "W1", "E1", k=1)
    assert len(got) == 1
    assert got[0].cost == pytest.approx(best[0])


@pytest.mark.parametrize("o, d", [("W1", "E1"), ("N", "S"), ("W6", "E6"), ("N", "E1"), ("S", "E6")])
def test_k_shortest_matches_enumeration(corridor, o, d):
    cost = free_flow_costs(corridor)
    oracle = brute_force_paths(corridor, o, d, cost)
    got = k_shortest_paths(corridor, o, d, k=3, cost=cost)
    assert len(got) == min(3, len(oracle))
    assert [p.cost for p in got] == pytest.approx([c for c, _ in oracle[:len(got)]])
    assert all(corridor.is_connected_path(p.sections) for p in got)


def test_unreachable_destination():
    secs = {"a": Section("a", 10, 1, 10, "x", "y"), "b": Section("b", 10, 1, 10, "u", "v")}
    net = Network(secs, [], centroids={"O": Centroid("O", "external", (("a", "out"),)),
                                       "D": Centroid("D", "external", (("b", "in"),))})
    with pytest.raises(NoPathError):
        k_shortest_paths(net, "O", "D")


@pytest.mark.parametrize("n", [1, 2, 3, 7])
def test_equal_costs_split_evenly(n):
    assert logit_probabilities([5.0] * n) == pytest.approx([1.0 / n] * n)


def test_logit_hand_value():
    p = logit_probabilities([1.0, 1.1], 12.0)
    assert p[0] == pytest.approx(1.0 / (1.0 + math.exp(-1.2)), abs=1e-12)
    assert p == pytest.approx([0.7685, 0.2315], abs=1e-4)


def test_logit_large_scale_picks_cheapest():
    p = logit_probabilities([3.0, 2.0, 2.5], 1e4)
    assert p[1] == pytest.approx(1.0)


def test_logit_is_scale_free_in_cost_units():
    assert logit_probabilities([60.0, 66.0]) == pytest.approx(logit_probabilities([1.0, 1.1]))


@given(st.lists(st.floats(0.1, 1e4), min_size=1, max_size=8), st.floats(0.1, 50))
def test_logit_sums_to_one(costs, scale):
    p = logit_probabilities(costs, scale)
    assert abs(p.sum() - 1.0) < 1e-9 and np.all(p >= 0)


@given(st.lists(st.floats(1.0, 1e3), min_size=1, max_size=6))
def test_clogit_beta0_is_logit(costs):
    n = len(costs)
    lengths = np.full(n, 100.0)
    ov = np.full((n, n), 30.0) + np.diag(np.full(n, 70.0))
    assert np.max(np.abs(clogit_probabilities(lengths, ov, costs, beta=0.0) - logit_probabilities(costs))) < 1e-12


def test_clogit_disjoint_equal_paths():
    p = clogit_probabilities([100.0, 100.0], np.diag([100.0, 100.0]), [10.0, 10.0], beta=0.1, gamma=1.0)
    assert p == pytest.approx([0.5, 0.5])


def test_commonality_factor_hand_evaluation():
    # paths 0 and 1 share a 40 m sub-segment; path 2 is disjoint
    L = [100.0, 120.0, 90.0]
    ov = np.array([[100.0, 40.0, 0.0], [40.0, 120.0, 0.0], [0.0, 0.0, 90.0]])
    cf = commonality_factors(L, ov, beta=0.1, gamma=1.0)
    hand = [0.1 * math.log(1 + 40 / math.sqrt(100 * 120)),
            0.1 * math.log(40 / math.sqrt(100 * 120) + 1),
            0.0]
    assert cf == pytest.approx(hand, abs=1e-12)
    costs = [10.0, 11.0, 10.5]
    u = [-12 * c / 10.0 - f for c, f in zip(costs, hand)]
    w = [math.exp(x) for x in u]
    assert clogit_probabilities(L, ov, costs, 12.0, 0.1, 1.0) == pytest.approx([x / sum(w) for x in w], abs=1e-12)


def test_overlap_matrix(grid):
    paths = [("NWo", "NW-NE", "NE-SE", "SEi"), ("NWo", "NW-SW", "SW-SE", "SEi")]
    lengths, ov = path_overlaps(grid, paths)
    assert lengths == pytest.approx([1000.0, 1000.0])
    assert ov[0, 1] == pytest.approx(200.0)


def _parallel(cost_b=1.0):
    """Two parallel one-section routes between centroids O and D."""
    secs = {
        "o": Section("o", 50, 1, 10, "c0", "n0"),
        "a": Section("a", 500, 1, 10, "n0", "n1"),
        "b": Section("b", 500 * cost_b, 1, 10, "n0", "n1"),
        "d": Section("d", 50, 1, 10, "n1", "c1"),
    }
    turns = [Turn("o", "a"), Turn("o", "b"), Turn("a", "d"), Turn("b", "d")]
    cen = {"O": Centroid("O", "external", (("o", "out"),)), "D": Centroid("D", "external", (("d", "in"),))}
    return Network(secs, turns, centroids=cen)


def _profile(q=600.0):
    return DemandProfile.uniform(OdMatrix(("O", "D"), [[0, q], [0, 0]]), 3600.0, 3600.0)


def test_single_path_assignment():
    secs = {"o": Section("o", 50, 1, 10, "c0", "n0"), "d": Section("d", 50, 1, 10, "n0", "c1")}
    cen = {"O": Centroid("O", "external", (("o", "out"),)), "D": Centroid("D", "external", (("d", "in"),))}
    net = Network(secs, [Turn("o", "d")], centroids=cen)
    plan = iterate_assignment(net, _profile())
    assert plan.paths_for(0, "O", "D") == [(("o", "d"), 1.0)]
    assert plan.iterations == 1 and plan.converged


def test_parallel_routes_split_evenly():
    plan = iterate_assignment(_parallel(), _profile(1500.0))
    shares = dict(plan.paths_for(0, "O", "D"))
    assert shares[("o", "a", "d")] == pytest.approx(0.5, abs=0.02)


def test_costlier_route_gets_less():
    base = dict(iterate_assignment(_parallel(1.0), _profile(1500.0)).paths_for(0, "O", "D"))
    dear = dict(iterate_assignment(_parallel(1.2), _profile(1500.0)).paths_for(0, "O", "D"))
    assert dear[("o", "b", "d")] < base[("o", "b", "d")]


def test_congestion_spreads_flow():
    light = dict(iterate_assignment(_parallel(1.1), _profile(100.0)).paths_for(0, "O", "D"))
    heavy = dict(iterate_assignment(_parallel(1.1), _profile(3000.0)).paths_for(0, "O", "D"))
    assert heavy[("o", "b", "d")] > light[("o", "b", "d")]


def test_path_set_probabilities(grid):
    ps = path_set(grid, "NW", "SE", RouteChoiceModel("clogit"))
    assert ps.probabilities.sum() == pytest.approx(1.0)
    assert len(ps.paths) == len(ps.costs) == len(ps.lengths)


def test_plan_round_trip():
    plan = single_path_plan({("O", "D"): ("o", "a", "d")})
    from shuttlesim.routing import AssignmentPlan
    assert AssignmentPlan.from_dict(plan.to_dict()).intervals == plan.intervals


def test_bad_model():
    with pytest.raises(ValueError):
        RouteChoiceModel("probit")
