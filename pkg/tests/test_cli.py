import json
import subprocess
import sys

import numpy as np
import pytest

import nbvplan as nv
from nbvplan import __version__
from nbvplan.cli import main
from nbvplan import simulation as sim


MICRO_TOML = """\
sensors = 2
candidates_per_sensor = 3
rounds = 2
resolution = 0.1
max_range = 6.0
image_width = 160
image_height = 120
scene_seeds = [3]
run_seeds = [0]
methods = ["ours", "random"]
room_count = 2
bounds = {min = [0.0, 0.0, 0.0], max = [4.0, 4.0, 2.0]}
"""


def _micro_json():
    return {
        "sensors": 2, "candidates_per_sensor": 3, "rounds": 2,
        "resolution": 0.1, "max_range": 6.0,
        "image_width": 160, "image_height": 120,
        "scene_seeds": [3], "run_seeds": [0],
        "methods": ["ours", "random"], "room_count": 2,
        "bounds": {"min": [0.0, 0.0, 0.0], "max": [4.0, 4.0, 2.0]},
    }


def _strip_times(rows):
    return [{k: v for k, v in r.items() if k != "plan_time_s"} for r in rows]


def test_version_subprocess():
    out = subprocess.run([sys.executable, "-m", "nbvplan", "--version"],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert out.stdout.strip() == f"nbvplan {__version__}"


def test_scene_gen_round_trip(tmp_path, capsys):
    prefix = str(tmp_path / "scene_a")
    argv = ["scene", "gen", "--seed", "1", "--rooms", "2",
            "--bounds", "4", "4", "2", "--resolution", "0.1",
            "--out", prefix]
    assert main(argv) == 0
    out = capsys.readouterr().out
    assert "scene_a.json" in out and "scene_a.nbvg" in out
    spec = sim.SceneSpec.from_dict(json.loads(
        (tmp_path / "scene_a.json").read_text()))
    assert spec.seed == 1 and spec.room_count == 2
    gt = nv.load_grid(str(tmp_path / "scene_a.nbvg"))
    _, want = sim.generate_scene(1, 2, nv.Box([0, 0, 0], [4, 4, 2]), 0.1)
    assert gt.dims == want.dims
    assert np.array_equal(gt.log_odds, want.log_odds)

    prefix_b = str(tmp_path / "scene_b")
    assert main(argv[:-1] + [prefix_b]) == 0
    assert (tmp_path / "scene_a.json").read_bytes() == \
        (tmp_path / "scene_b.json").read_bytes()
    assert (tmp_path / "scene_a.nbvg").read_bytes() == \
        (tmp_path / "scene_b.nbvg").read_bytes()


def test_scene_gen_usage_errors(tmp_path, capsys):
    base = ["scene", "gen", "--seed", "0", "--out", str(tmp_path / "s")]
    assert main(base + ["--bounds", "4", "0", "2"]) == 2
    assert "bounds" in capsys.readouterr().err
    assert main(base + ["--resolution", "-0.1"]) == 2
    assert "resolution" in capsys.readouterr().err


@pytest.fixture(scope="module")
def sim_out(tmp_path_factory):
    """One micro simulate run shared by the inspection tests."""
    root = tmp_path_factory.mktemp("simcli")
    cfg = root / "cfg.toml"
    cfg.write_text(MICRO_TOML)
    out = root / "run"
    rc = main(["simulate", "--config", str(cfg), "--out", str(out),
               "--jobs", "1"])
    return rc, out


def test_simulate_writes_outputs(sim_out):
    rc, out = sim_out
    assert rc == 0
    csv_path = out / "metrics.csv"
    assert csv_path.exists()
    header = csv_path.read_text().splitlines()[0]
    assert header == ",".join(sim.CSV_COLUMNS)
    rows = sim.read_metrics_csv(csv_path)
    assert {r["method"] for r in rows} == {"ours", "random"}
    assert max(r["round"] for r in rows) == 1

    summary = json.loads((out / "summary.json").read_text())
    want = sim.summarize_rows(rows)
    assert summary == json.loads(json.dumps(want))

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["tool"] == "nbvplan"
    assert manifest["version"] == __version__
    assert manifest["config"]["sensors"] == 2
    assert manifest["scene_seeds"] == [3]
    assert manifest["wall_clock_s"] > 0
    for path in manifest["outputs"].values():
        assert (out / path.split("/")[-1]).exists()


def test_simulate_json_config_matches_toml(tmp_path, sim_out):
    _, toml_out = sim_out
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(_micro_json()))
    out = tmp_path / "run_json"
    assert main(["simulate", "--config", str(cfg), "--out", str(out),
                 "--jobs", "1"]) == 0
    a = sim.read_metrics_csv(toml_out / "metrics.csv")
    b = sim.read_metrics_csv(out / "metrics.csv")
    assert _strip_times(a) == _strip_times(b)


def test_simulate_flag_overrides_config(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text(MICRO_TOML)
    out = tmp_path / "run_round1"
    assert main(["simulate", "--config", str(cfg), "--out", str(out),
                 "--jobs", "1", "--rounds", "1", "--methods", "random"]) == 0
    rows = sim.read_metrics_csv(out / "metrics.csv")
    assert {r["method"] for r in rows} == {"random"}
    assert max(r["round"] for r in rows) == 0


def test_simulate_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text("sensores = 2\n")
    assert main(["simulate", "--config", str(cfg),
                 "--out", str(tmp_path / "x")]) == 2
    assert "unknown config field: sensores" in capsys.readouterr().err


def test_simulate_invalid_config_value(tmp_path, capsys):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text("p_hit = 0.4\n")
    assert main(["simulate", "--config", str(cfg),
                 "--out", str(tmp_path / "x")]) == 2
    err = capsys.readouterr().err
    assert "invalid config" in err and "p_hit" in err
    cfg.write_text("methods = [\"frontier\"]\n")
    assert main(["simulate", "--config", str(cfg),
                 "--out", str(tmp_path / "x")]) == 2
    assert "frontier" in capsys.readouterr().err
    assert main(["simulate", "--config", str(tmp_path / "absent.toml"),
                 "--out", str(tmp_path / "x")]) == 2
    assert "not found" in capsys.readouterr().err


def test_eval_matches_library_summary(tmp_path, capsys, sim_out):
    _, out = sim_out
    csv_path = out / "metrics.csv"
    assert main(["eval", "--csv", str(csv_path)]) == 0
    printed = json.loads(capsys.readouterr().out)
    want = sim.summarize_rows(sim.read_metrics_csv(csv_path))
    assert printed == json.loads(json.dumps(want))

    dest = tmp_path / "summary.json"
    assert main(["eval", "--csv", str(csv_path), "--out", str(dest)]) == 0
    capsys.readouterr()
    assert json.loads(dest.read_text()) == printed

    assert main(["eval", "--csv", str(tmp_path / "none.csv")]) == 2
    assert "could not read" in capsys.readouterr().err


def _plan_inputs(tmp_path):
    grid = nv.new_grid(nv.Box([0, 0, 0], [2.0, 2.0, 1.0]), 0.1)
    map_path = tmp_path / "map.nbvg"
    nv.save_grid(grid, str(map_path))
    views = [
        {"id": 0, "position": [0.3, 0.3, 0.5], "target": [1.8, 1.8, 0.5]},
        {"id": 1, "position": [0.3, 1.7, 0.5], "target": [1.8, 0.3, 0.5]},
        {"id": 2, "position": [1.7, 0.3, 0.5], "target": [0.2, 1.8, 0.5]},
        {"id": 3, "position": [1.7, 1.7, 0.5], "target": [0.2, 0.2, 0.5]},
    ]
    cand = {"blocks": [[0, 1], [2, 3]], "views": views}
    cand_path = tmp_path / "candidates.json"
    cand_path.write_text(json.dumps(cand))
    return map_path, cand_path, cand


def test_plan_greedy_matches_library(tmp_path, capsys):
    map_path, cand_path, cand = _plan_inputs(tmp_path)
    argv = ["plan", "--map", str(map_path), "--candidates", str(cand_path),
            "--image-width", "64", "--image-height", "48",
            "--max-range", "4.0"]
    assert main(argv) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["method"] == "ours"
    assert result["round"] == 0
    assert [s["sensor"] for s in result["selections"]] == [0, 1]
    assert all("pose" in s for s in result["selections"])
    assert result["utility"] > 0
    assert sum(result["marginals"]) == pytest.approx(result["utility"],
                                                     rel=1e-9)

    grid = nv.load_grid(str(map_path))
    poses = {v["id"]: nv.look_at(v["position"], v["target"])
             for v in cand["views"]}
    intr = nv.default_intrinsics(64, 48, 60.0)
    model = nv.ScoreModel(gain="entropy", weight="unit")
    cache, _ = nv.score_views_fast(grid, poses, intr, model, sampling=0.1,
                                   max_range=4.0)
    part = nv.ViewPartition(blocks=[list(b) for b in cand["blocks"]],
                            poses=poses)
    want = nv.greedy_plan(part, cache)
    assert result["utility"] == want.utility
    assert [s["view_id"] for s in result["selections"]] == \
        want.chosen.view_ids()


def test_plan_random_and_errors(tmp_path, capsys):
    map_path, cand_path, cand = _plan_inputs(tmp_path)
    base = ["plan", "--map", str(map_path), "--candidates", str(cand_path),
            "--image-width", "64", "--image-height", "48"]
    assert main(base + ["--method", "random"]) == 2
    assert "--seed" in capsys.readouterr().err

    assert main(base + ["--method", "random", "--seed", "7"]) == 0
    got = json.loads(capsys.readouterr().out)
    poses = {v["id"]: nv.look_at(v["position"], v["target"])
             for v in cand["views"]}
    part = nv.ViewPartition(blocks=[list(b) for b in cand["blocks"]],
                            poses=poses)
    want = nv.random_plan(part, 7)
    assert [s["view_id"] for s in got["selections"]] == want.view_ids()

    assert main(base + ["--method", "single"]) == 0
    got = json.loads(capsys.readouterr().out)
    assert len(got["selections"]) == 2

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"views": cand["views"]}))
    assert main(["plan", "--map", str(map_path),
                 "--candidates", str(bad)]) == 2
    assert "bad candidates" in capsys.readouterr().err

    missing_pose = tmp_path / "nopose.json"
    missing_pose.write_text(json.dumps({"blocks": [[0], [9]],
                                        "views": cand["views"]}))
    assert main(["plan", "--map", str(map_path),
                 "--candidates", str(missing_pose)]) == 2
    assert "no pose" in capsys.readouterr().err

    assert main(["plan", "--map", str(tmp_path / "ghost.nbvg"),
                 "--candidates", str(cand_path)]) == 2
    assert "could not read map" in capsys.readouterr().err
