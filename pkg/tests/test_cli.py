import json
import subprocess
import sys

import numpy as np
import pytest

from shuttlesim.behavior import HDV, SHUTTLE, load_vehicle_params
from shuttlesim.calibration import apply_params, assignment_counts, route_cases, simulate_cases, write_log
from shuttlesim.cli import main
from shuttlesim.demand import OdMatrix
from shuttlesim.fixtures import GRID_CENTROIDS, grid_fixture, grid_od, single_lane_corridor
from shuttlesim.outputs import read_table

SIM = ["--network", "fixture:single-lane", "--demand", "fixture:single-lane", "--duration", "300",
       "--warmup", "60"]


def call(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_simulate_writes_tables(tmp_path, capsys):
    code, out, _ = call(capsys, "simulate", *SIM, "--scenario", "S3", "--seed", "4", "-o", str(tmp_path))
    assert code == 0
    res = json.loads(out)
    assert res["injected"] == res["exited"] + res["in_network"] + res["queued"]
    for name in ("trajectories", "detector_counts", "traversals", "vehicle_totals"):
        assert (tmp_path / f"{name}.csv").exists()
    head = (tmp_path / "trajectories.csv").read_text().splitlines()[:8]
    assert head[0].startswith("# shuttlesim") and "# seed: 4" in head
    assert any(h.startswith("# input network: sha256=") for h in head)
    rows = read_table(tmp_path / "trajectories.csv")
    assert rows and set(rows[0]) == {"t_s", "vehicle_id", "class", "section_id", "offset_m", "speed_mps"}


def test_simulate_is_byte_identical(tmp_path, capsys):
    for d in ("a", "b"):
        assert call(capsys, "simulate", *SIM, "--headway", "10", "--seed", "2", "-o", str(tmp_path / d))[0] == 0
    for f in ("trajectories.csv", "detector_counts.csv", "traversals.csv", "vehicle_totals.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    call(capsys, "simulate", *SIM, "--headway", "10", "--seed", "3", "-o", str(tmp_path / "c"))
    assert (tmp_path / "a" / "trajectories.csv").read_bytes() != (tmp_path / "c" / "trajectories.csv").read_bytes()


def test_missing_network_file(tmp_path, capsys):
    code, _, err = call(capsys, "simulate", "--network", str(tmp_path / "nope.json"), "-o", str(tmp_path))
    assert code == 1
    rec = json.loads(err)
    assert rec["error"] == "InputError" and rec["path"].endswith("nope.json")


def test_bad_network_document(tmp_path, capsys):
    bad = tmp_path / "net.json"
    bad.write_text('{"sections": [{"id": "a"}]}')
    code, _, err = call(capsys, "simulate", "--network", str(bad), "-o", str(tmp_path))
    assert code == 1 and json.loads(err)["path"] == str(bad)


def test_manifest_and_env_output(tmp_path, capsys, monkeypatch):
    man = tmp_path / "run.json"
    man.write_text(json.dumps({"network": "fixture:single-lane", "demand": "fixture:single-lane",
                               "duration": 120, "warmup": 0, "seed": 1, "headway": 30}))
    monkeypatch.setenv("SHUTTLESIM_OUTPUT_DIR", str(tmp_path / "env-out"))
    code, out, _ = call(capsys, "simulate", "--config", str(man))
    assert code == 0
    assert (tmp_path / "env-out" / "traversals.csv").exists()
    assert "# seed: 1" in (tmp_path / "env-out" / "traversals.csv").read_text()


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as e:
        main(["calibrate", "weather"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["simulate", "--scenario", "S7"])
    assert e.value.code == 2


def test_calibrate_vehicles_recovers_planted(tmp_path, capsys):
    net = single_lane_corridor()
    planted = apply_params(HDV, {"speed_acceptance": 1.1})
    cases = [c for c in route_cases(net, "shuttle") if c.condition == "free"]
    logs = simulate_cases(net, {"hdv": planted, "shuttle": SHUTTLE}, cases, 2, seed=5)
    (tmp_path / "logs").mkdir()
    for i, lg in enumerate(logs):
        write_log(lg, tmp_path / "logs" / f"trip{i}.csv")
    grid = json.dumps({"speed_acceptance": [1.0, 1.1, 1.2]})
    code, out, _ = call(capsys, "calibrate", "vehicles", "--network", "fixture:single-lane", "--trajectories",
                        str(tmp_path / "logs"), "--grid", grid, "--replications", "2", "--seed", "5",
                        "-o", str(tmp_path / "cal"))
    assert code == 0, out
    params = load_vehicle_params(tmp_path / "cal" / "vehicle_params.json")
    assert params["hdv"].speed_acceptance.mean == pytest.approx(1.1)
    scores = read_table(tmp_path / "cal" / "grid_scores.csv")
    assert len(scores) == 3
    acc = read_table(tmp_path / "cal" / "accuracy.csv")
    assert float(acc[0]["mape_pct"]) < 1.0


def test_calibrate_demand(tmp_path, capsys):
    net = grid_fixture()
    truth = OdMatrix(GRID_CENTROIDS, grid_od().trips * np.random.default_rng(4).uniform(0.75, 1.25, (4, 4)))
    hourly = assignment_counts(net)(truth)
    csv = tmp_path / "counts.csv"
    lines = ["detector_id,bin,count"]
    for det, q in hourly.items():
        lines += [f"{det},{b},{q / 12:.3f}" for b in range(12)]
    csv.write_text("\n".join(lines) + "\n")
    code, out, _ = call(capsys, "calibrate", "demand", "--network", "fixture:grid", "--demand", "fixture:grid",
                        "--detectors", str(csv), "-o", str(tmp_path / "od"))
    assert code == 0, out
    summary = {r["stage"]: r for r in read_table(tmp_path / "od" / "geh_summary.csv")}
    assert float(summary["after"]["sum_geh_sq"]) < float(summary["before"]["sum_geh_sq"])
    assert float(summary["after"]["geh_lt5_pct"]) >= float(summary["before"]["geh_lt5_pct"])
    assert (tmp_path / "od" / "demand_adjusted.json").exists()


def test_calibrate_demand_unknown_detector(tmp_path, capsys):
    csv = tmp_path / "counts.csv"
    csv.write_text("detector_id,bin,count\nD_nowhere,0,5\n")
    code, _, err = call(capsys, "calibrate", "demand", "--network", "fixture:grid", "--demand", "fixture:grid",
                        "--detectors", str(csv), "-o", str(tmp_path))
    assert code == 1 and "D_nowhere" in json.loads(err)["message"]


def test_scenarios_and_report(tmp_path, capsys):
    code, out, _ = call(capsys, "scenarios", *SIM, "--scenarios", "S0,S3", "--replications", "2",
                        "-o", str(tmp_path))
    assert code == 0
    rows = read_table(tmp_path / "metrics.csv")
    assert {r["scenario"] for r in rows} == {"S0", "S3"}
    assert {r["group"] for r in rows} == {"EB", "WB", "Aggregated"}
    code, out, _ = call(capsys, "report", str(tmp_path))
    assert code == 0 and "HDV statistics, off-peak" in out and "Aggregated" in out
    code, out, _ = call(capsys, "report", str(tmp_path), "--format", "csv")
    assert out.splitlines()[0].startswith("off-peak,S0")


def test_scenarios_tune_s4(tmp_path, capsys):
    code, out, _ = call(capsys, "scenarios", *SIM, "--scenarios", "S0,S4", "--replications", "1", "--tune-s4",
                        "--epsilon", "100", "-o", str(tmp_path))
    assert code == 0
    res = json.loads(out)
    # with a huge tolerance the first attempt already qualifies
    assert res["tuned_speed_mph"] == {"off-peak": 9.5}
    tun = read_table(tmp_path / "s4_tuning.csv")
    assert tun[0]["converged"] == "1" and tun[0]["selected"] == "1"
    assert {r["scenario"] for r in read_table(tmp_path / "metrics.csv")} == {"S0", "S4"}


def test_report_missing_directory(tmp_path, capsys):
    code, _, err = call(capsys, "report", str(tmp_path / "none"))
    assert code == 1 and json.loads(err)["error"] == "FileNotFoundError"


def test_module_entry_point(tmp_path):
    p = subprocess.run([sys.executable, "-m", "shuttlesim", "simulate", "--network", "nope.json"],
                       capture_output=True, text=True, cwd=tmp_path)
    assert p.returncode == 1 and json.loads(p.stderr)["error"] == "InputError"
