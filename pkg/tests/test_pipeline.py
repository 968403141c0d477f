import csv
import json

import numpy as np
import pytest

from base.voa_config_parser import clear_scenario_cache, load_scenario
from base.voa_pipeline import run_scenario
from voa import cli


@pytest.fixture(autouse=True)
def fresh_cache():
    clear_scenario_cache()
    yield
    clear_scenario_cache()


def read_rows(path):
    with open(path, "r", encoding="utf-8", newline="") as file:
        return list(csv.reader(file))


def test_run_is_deterministic(demo_dir, tmp_path):
    scenario = load_scenario(demo_dir / "demo.json")
    first = run_scenario(scenario, tmp_path / "a")
    second = run_scenario(scenario, tmp_path / "b", threads=2)
    names = sorted(p.name for p in first.artifacts)
    assert names == sorted(p.name for p in second.artifacts)
    assert "voa-report.json" in names
    assert "eval-report.csv" in names
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_run_reports(demo_dir, tmp_path):
    outcome = run_scenario(load_scenario(demo_dir / "demo.json"), tmp_path)
    report = json.loads((tmp_path / "voa-report.json").read_text(encoding="utf-8"))
    assert report["selected"] == outcome.result.selected_id
    assert [c["id"] for c in report["configs"]] == ["c1", "c2", "c3", "c4"]
    assert all(c["voa"] >= -1e-12 for c in report["configs"])

    rows = read_rows(tmp_path / "eval-report.csv")
    assert rows[0] == ["object", "metric", "config", "truth", "selected", "delta", "delta_star", "advantage"]
    truths = {row[3] for row in rows[1:]}
    assert truths == {"p1", "p2", "p3", "p4", "p5", "p6", "mean_uniform", "mean_weighted"}
    assert len(rows) == 1 + 4 * 6 + 4 * 2

    matrix = read_rows(tmp_path / "similarity-matrix-c1.csv")
    assert matrix[0] == ["id", "p1", "p2", "p3", "p4", "p5", "p6"]
    for i in range(1, 7):
        assert float(matrix[i][i]) == 1.0


GOLDEN_FILES = [
    "voa-report.json",
    "voa-values.csv",
    "eval-report.csv",
    "similarity-matrix-c1.csv",
    "similarity-matrix-c2.csv",
    "similarity-matrix-c3.csv",
    "similarity-matrix-c4.csv",
]


@pytest.mark.parametrize("name", GOLDEN_FILES)
def test_demo_reports_match_golden_files(name, demo_dir, tmp_path):
    # every pose is told apart by every config, so all values are exact binary fractions
    run_scenario(load_scenario(demo_dir / "demo.json"), tmp_path)
    assert (tmp_path / name).read_bytes() == (demo_dir / "golden" / name).read_bytes()


def test_single_pose_scenario(demo_dir, tmp_path):
    raw = {
        "schema": "voa-scenario/1",
        "name": "single",
        "mesh": str(demo_dir / "holder.obj"),
        "stable_poses": {"base_down": {"translation": [0, 0, 0.02]}},
        "poses": [{"id": "only", "category": "base_down", "weight": 1.0}],
        "grasp_scores": str(demo_dir / "grasp_scores.csv"),
        "sensor": {"kind": "lidar", "configs": [{"id": "front", "position": [0.5, 0.0], "height": 0.01, "yaw_deg": 180}]},
        "metric": {"name": "tau1"},
    }
    path = tmp_path / "single.json"
    path.write_text(json.dumps(raw), encoding="utf-8")
    outcome = run_scenario(load_scenario(path), tmp_path / "out")
    assert outcome.result.selected_id == "front"
    assert outcome.result.selected_voa == 0.0
    assert not outcome.result.selected_improves
    row = read_rows(tmp_path / "out" / "eval-report.csv")[1]
    assert row[3] == "only"
    assert row[5] == "0.0"
    assert row[6] == "undefined"


def test_cli_voa(demo_dir, tmp_path, capsys):
    assert cli(["voa", str(demo_dir / "demo.json"), "--out", str(tmp_path)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("baseline\t")
    assert lines[-1].startswith("selected\t")
    assert (tmp_path / "voa-values.csv").is_file()


def test_cli_predict_obs(demo_dir, tmp_path):
    assert cli(["predict-obs", str(demo_dir / "demo.json"), "--pose", "p3", "--config", "c1", "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "observation-p3-c1.csv")
    assert len(rows) == 361
    assert rows[0] == ["bearing_deg", "range_m"]


def test_cli_eval_matches_direct_computation(demo_dir, tmp_path):
    assert cli(["eval", str(demo_dir / "demo.json"), "--truth", "p2", "--out", str(tmp_path)]) == 0
    rows = {row[2]: row for row in read_rows(tmp_path / "eval-report.csv")[1:]}

    scenario = load_scenario(demo_dir / "demo.json")
    belief = scenario.actor_belief()
    w = belief.weights
    gamma = scenario.grasp_table.matrix_for(belief.poses, scenario.score_lookup)
    g_i = int(np.argmax(gamma @ w))
    predictor = scenario.predictor()
    for config in scenario.configs:
        scans = {pose.pose_id: predictor.predict(pose, config) for pose in belief.poses}
        omega = np.array([scenario.metric.score(scans[pid], scans["p2"]) for pid in belief.pose_ids])
        posterior = w * omega / np.sum(w * omega)
        g_f = int(np.argmax(gamma @ posterior))
        expected = float(gamma[g_f] @ w) - float(gamma[g_i] @ w)
        assert rows[config.config_id][3] == "p2"
        assert float(rows[config.config_id][5]) == pytest.approx(expected, abs=1e-12)


def test_cli_rank_cams(demo_dir, tmp_path, capsys):
    assert cli(["rank-cams", str(demo_dir / "demo_camera.json"), "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "camera-ranking.csv")
    assert rows[0] == ["config", "h", "distance", "visibility"]
    assert sorted(row[0] for row in rows[1:]) == ["far", "side", "top"]
    hs = [float(row[1]) for row in rows[1:]]
    assert hs == sorted(hs, reverse=True)


@pytest.mark.parametrize(
    "argv",
    [
        ["voa", "--bogus"],
        ["frobnicate"],
        ["voa", "missing-scenario.json"],
        ["rank-cams", "DEMO"],
        ["obs-eval", "DEMO"],
        ["eval", "DEMO", "--truth", "p99"],
        ["predict-obs", "DEMO", "--pose", "p1", "--config", "c9"],
    ],
)
def test_cli_input_errors_exit_2(argv, demo_dir, tmp_path):
    argv = [str(demo_dir / "demo.json") if a == "DEMO" else a for a in argv]
    assert cli(argv + ["--out", str(tmp_path)]) == 2


def write_scenario(demo_dir, tmp_path, **changes):
    raw = json.loads((demo_dir / "demo.json").read_text(encoding="utf-8"))
    raw["mesh"] = str(demo_dir / "holder.obj")
    raw["grasp_scores"] = str(demo_dir / "grasp_scores.csv")
    raw.update(changes)
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(raw), encoding="utf-8")
    return path


@pytest.mark.parametrize(
    "changes, field",
    [
        ({"metric": {"name": "tau1", "params": {"margin": "abc"}}}, "metric.params.margin"),
        ({"metric": {"name": "tau1", "params": {"margin": None}}}, "metric.params.margin"),
        ({"metric": {"name": "tau3", "params": {"sigma": [1.0]}}}, "metric.params.sigma"),
        ({"grasp_scores": "LATIN1"}, "grasp_scores"),
    ],
)
def test_cli_bad_scenario_inputs_exit_2(changes, field, demo_dir, tmp_path, capsys):
    latin1 = tmp_path / "latin1.csv"
    latin1.write_bytes(b"pose,g1\n\xff\xfe,0.5\n")
    changes = {k: str(latin1) if v == "LATIN1" else v for k, v in changes.items()}
    path = write_scenario(demo_dir, tmp_path, **changes)
    assert cli(["voa", str(path), "--out", str(tmp_path / "out")]) == 2
    assert f"{field}:" in capsys.readouterr().err


def test_cli_non_utf8_scenario_exits_2(tmp_path, capsys):
    path = tmp_path / "scenario.json"
    path.write_bytes(b'{"schema": "\xff"}')
    assert cli(["voa", str(path), "--out", str(tmp_path / "out")]) == 2
    assert "not UTF-8" in capsys.readouterr().err
