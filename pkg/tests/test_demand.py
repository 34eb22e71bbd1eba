import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from shuttlesim.demand import DemandProfile, OdMatrix, load_demand, save_demand, save_od_matrix
from shuttlesim.engine import SimConfig, demand_arrivals, inject_demand

C = ("A", "B", "C")


def matrix(a=0.0, b=0.0):
    t = np.zeros((3, 3))
    t[0, 1], t[1, 2] = a, b
    return OdMatrix(C, t)


def test_zero_cell_gives_no_arrivals():
    arr = inject_demand(matrix(0.0, 50.0), np.random.default_rng(1))
    assert arr and all((a.origin, a.destination) == ("B", "C") for a in arr)


def test_negative_cell_rejected():
    with pytest.raises(ValueError):
        OdMatrix(("A", "B"), [[0, -1], [0, 0]])


def test_poisson_moments():
    counts = np.array([len(inject_demand(matrix(40.0), np.random.default_rng(s))) for s in range(200)])
    # mean and variance both equal the cell value for a Poisson count
    assert abs(counts.mean() - 40.0) < 3 * np.sqrt(40.0 / 200)
    assert 0.7 * 40 < counts.var(ddof=1) < 1.3 * 40


def test_arrival_times_are_uniform_within_slice():
    arr = inject_demand(matrix(4000.0), np.random.default_rng(3), start=100.0, interval=900.0)
    t = np.array([a.time for a in arr])
    assert t.min() >= 100.0 and t.max() < 1000.0
    assert np.all(np.diff(t) >= 0)
    assert stats.kstest((t - 100.0) / 900.0, "uniform").pvalue > 0.001


def test_horizon_arrivals_include_warmup():
    prof = DemandProfile.uniform(matrix(400.0), 3600.0, 900.0)
    cfg = SimConfig(duration=3600.0, warmup=600.0)
    totals = [len(demand_arrivals(prof, cfg, np.random.default_rng(s))) for s in range(40)]
    # 400 trips over the hour plus 600 s of warmup at the first slice's rate
    assert abs(np.mean(totals) - 400 * 4200 / 3600) < 3 * np.sqrt(467 / 40)


def test_uniform_profile():
    prof = DemandProfile.uniform(matrix(100.0), 3600.0, 900.0)
    assert prof.n_intervals == 4 and prof.duration == 3600.0
    assert prof.slice(2)["A", "B"] == pytest.approx(25.0)
    assert prof.total() == pytest.approx(100.0)


def test_with_totals_keeps_shape():
    s = np.zeros((2, 3, 3))
    s[0, 0, 1], s[1, 0, 1] = 10.0, 30.0
    prof = DemandProfile(C, 900.0, s).with_totals(matrix(80.0, 20.0))
    assert prof.slices[:, 0, 1] == pytest.approx([20.0, 60.0])
    # a cell with no prior profile is spread evenly
    assert prof.slices[:, 1, 2] == pytest.approx([10.0, 10.0])


@given(st.lists(st.floats(0, 500), min_size=9, max_size=9), st.floats(0.1, 3))
def test_scaled_total(cells, f):
    prof = DemandProfile.uniform(OdMatrix(C, np.array(cells).reshape(3, 3)))
    assert prof.scaled(f).total() == pytest.approx(prof.total() * f)


def test_round_trip(tmp_path):
    profs = {"peak": DemandProfile.uniform(matrix(12.0, 3.5)), "off-peak": DemandProfile.uniform(matrix(1.0))}
    save_demand(profs, tmp_path / "d.json")
    back = load_demand(tmp_path / "d.json")
    assert set(back) == set(profs)
    assert np.array_equal(back["peak"].slices, profs["peak"].slices)
    save_od_matrix(matrix(5.0), tmp_path / "m.json")
    assert (tmp_path / "m.json").exists()


def test_bad_shape():
    with pytest.raises(ValueError):
        DemandProfile(C, 900.0, np.zeros((3, 3)))
