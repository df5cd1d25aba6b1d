import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from selfsteer import cli
from selfsteer.course import benchmark_course, straight_course
from selfsteer.geometry import PlanarPose
from selfsteer.trajectory import Trajectory, load_tum, save_tum

DATA = Path(__file__).parent / "data"


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_generate_single_run_lies_on_centerline(tmp_path):
    assert run("generate", "--out", tmp_path, "--set", "generate.n_traj=1") == 0
    (traj,) = [load_tum(p) for p in tmp_path.glob("*.tum")]
    course = benchmark_course()
    assert max(abs(course.project(p.x, p.y)[1]) for p in traj.poses) < 0.05
    doc = json.loads((tmp_path / "manifest.json").read_text())
    assert doc["command"] == "generate" and doc["config"]["generate"]["n_traj"] == 1
    assert sorted(doc["outputs"]) == ["course.json", "run00.tum"]


def test_label_on_straight_gives_zero_dy(tmp_path):
    poses = [PlanarPose(0.1 * k, 0.0) for k in range(200)]
    save_tum(Trajectory("a", [0.02 * k for k in range(200)], poses), tmp_path / "a.tum")
    assert run("label", "--out", tmp_path / "lab", "--set", "course=straight",
               "--set", f"trajectories={tmp_path / 'a.tum'}") == 0
    rows = (tmp_path / "lab" / "dataset.csv").read_text().splitlines()
    header = rows[0].split(",")
    assert len(rows) > 30
    for r in rows[1:]:
        assert abs(float(r.split(",")[header.index("dy")])) < 1e-9


def test_label_reproduces_golden_csv(tmp_path):
    assert run("label", "--out", tmp_path, "--set", f"course={DATA / 'fixture_course.json'}",
               "--set", f"trajectories={DATA}") == 0
    assert (tmp_path / "dataset.csv").read_text() == (DATA / "golden_dataset.csv").read_text()
    inputs = json.loads((tmp_path / "manifest.json").read_text())["inputs"]
    assert sorted(inputs) == ["fix0.tum", "fix1.tum", "fix2.tum"]


def test_eval_oracle_row(tmp_path):
    assert run("eval", "--out", tmp_path, "--set", "eval.duration=5") == 0
    header, row = (tmp_path / "report.csv").read_text().splitlines()
    rec = dict(zip(header.split(","), row.split(",")))
    assert rec["model"] == "oracle" and float(rec["in_track_ratio"]) == 1.0


def test_train_then_eval_model(tmp_path):
    lab = tmp_path / "lab"
    assert run("label", "--out", lab, "--set", f"course={DATA / 'fixture_course.json'}",
               "--set", f"trajectories={DATA}") == 0
    assert run("train", "--out", tmp_path / "m", "--set", f"dataset={lab}",
               "--set", "train.epochs=3") == 0
    loss = (tmp_path / "m" / "loss.csv").read_text().splitlines()
    assert loss[0] == "epoch,loss" and len(loss) == 4
    assert run("eval", "--out", tmp_path / "e", "--set", f"eval.policy={tmp_path / 'm' / 'model.json'}",
               "--set", "eval.duration=2") == 0


@pytest.mark.parametrize("argv", [
    ["eval", "--set", "eval.dynamics=warp"],
    ["eval", "--set", "eval.duration=0"],
    ["train"],  # no dataset given
    ["label", "--set", "trajectories=/nonexistent"],
    ["generate", "--set", "generate.n_traj=0"],
    ["generate", "--set", "generate.colour=1"],
    ["eval", "--set", "tol=2"],
])
def test_invalid_configs_exit_2(tmp_path, argv, capsys):
    assert run(*argv, "--out", tmp_path / "o") == 2
    assert capsys.readouterr().err.startswith("error:")


def test_bad_config_file_exits_2(tmp_path):
    bad = tmp_path / "c.json"
    bad.write_text("{nope")
    assert run("eval", "--config", bad, "--out", tmp_path) == 2
    bad.write_text(json.dumps({"mystery": 1}))
    assert run("eval", "--config", bad, "--out", tmp_path) == 2
    bad.write_text(json.dumps({"preset": "tiny"}))
    assert run("eval", "--config", bad, "--out", tmp_path) == 2


def test_corrupt_trajectory_exits_2(tmp_path):
    (tmp_path / "x.tum").write_text("0 0 0 0 0 0 0 1\n0 1 0 0 0 0 0 1\n")
    assert run("label", "--out", tmp_path / "o", "--set", f"trajectories={tmp_path / 'x.tum'}") == 2


def test_incompatible_routes_exit_3(tmp_path, capsys):
    n = 100
    a = [PlanarPose(0.1 * k, 0.0) for k in range(n)]
    b = [PlanarPose(0.0, 0.1 * k, math.pi / 2) for k in range(n)]
    ts = [0.02 * k for k in range(n)]
    save_tum(Trajectory("a", ts, a), tmp_path / "a.tum")
    save_tum(Trajectory("b", ts, b), tmp_path / "b.tum")
    assert run("label", "--out", tmp_path / "o", "--set", f"trajectories={tmp_path}",
               "--set", "course=straight") == 3
    assert "IncompatibleRoutes" in capsys.readouterr().err


def test_unknown_sweep_is_usage_error(capsys):
    with pytest.raises(SystemExit) as e:
        run("sweep", "laps")
    assert e.value.code == 2
    assert "invalid choice" in capsys.readouterr().err


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "selfsteer.cli", "eval", "--out", str(tmp_path),
                           "--set", "eval.duration=1", "--seed", "4"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads((tmp_path / "manifest.json").read_text())["config"]["seed"] == 4


def test_straight_course_available():
    assert cli.COURSES["straight"]().id == straight_course().id
