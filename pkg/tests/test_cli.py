import json
import subprocess
import sys

import pytest

from distortion_points import objio, param, pipeline, shapes
from distortion_points.cli import run_cli
from distortion_points.mesh import is_disk


@pytest.fixture
def cube_obj(tmp_path, cube8):
    p = tmp_path / "cube.obj"
    objio.save_obj(cube8, p)
    return p


@pytest.fixture
def sphere_obj(tmp_path, icosphere3):
    p = tmp_path / "sphere.obj"
    objio.save_obj(icosphere3, p)
    return p


def corner_points(tmp_path, mesh):
    ids = [i for i, x in enumerate(mesh.vertices.tolist()) if all(c in (0.0, 1.0) for c in x)]
    p = tmp_path / "points.json"
    p.write_text(json.dumps({"points": [{"vertex": i, "votes": 10} for i in ids]}))
    return p


def stderr_error(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_detect_to_file(tmp_path, cube_obj):
    out = tmp_path / "pts.json"
    assert run_cli(["detect", str(cube_obj), "--seed", "7", "--runs", "4", "--min-votes", "2", "-o", str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["meta"]["seed"] == 7 and d["meta"]["R"] == 4
    assert all(p["votes"] >= 2 for p in d["points"])


def test_detect_to_stdout_is_deterministic(cube_obj, capsys):
    args = ["detect", str(cube_obj), "--runs", "4"]
    assert run_cli(args) == 0
    first = capsys.readouterr().out
    assert run_cli(args) == 0
    assert capsys.readouterr().out == first
    json.loads(first)


def test_cut_command(tmp_path, cube_obj, cube8):
    pts = corner_points(tmp_path, cube8)
    out, edges = tmp_path / "cut.obj", tmp_path / "edges.json"
    assert run_cli(["cut", str(cube_obj), str(pts), "-o", str(out), "--json", str(edges)]) == 0
    assert is_disk(objio.load_obj(out))
    assert len(json.loads(edges.read_text())["edges"]) > 0


def test_param_command(tmp_path, cube_obj, cube8):
    pts = corner_points(tmp_path, cube8)
    out, rep = tmp_path / "uv.obj", tmp_path / "report.json"
    assert run_cli(["param", str(cube_obj), str(pts), "-o", str(out), "--report", str(rep)]) == 0
    report = json.loads(rep.read_text())
    assert report["delta_avg"] >= 1.0 and report["timings_ms"] == {}
    assert "vt " in out.read_text()


def test_param_timings_flag(tmp_path, cube_obj, cube8, capsys):
    pts = corner_points(tmp_path, cube8)
    assert run_cli(["param", str(cube_obj), str(pts), "-o", str(tmp_path / "uv.obj"), "--timings", "--max-iters", "3"]) == 0
    assert json.loads(capsys.readouterr().out)["timings_ms"]


def test_pipeline_on_sphere(tmp_path, sphere_obj):
    out = tmp_path / "run"
    assert run_cli(["pipeline", str(sphere_obj), "-d", str(out), "--runs", "4"]) == 0
    assert json.loads((out / "points.json").read_text())["points"] == []
    assert json.loads((out / "report.json").read_text())["delta_avg"] >= 1.0
    assert (out / "uv.obj").exists() and (out / "cut.json").exists()


def test_config_file_and_flag_precedence(tmp_path, cube_obj):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("R = 2\nmin_votes = 1\nseed = 3\n")
    out = tmp_path / "pts.json"
    assert run_cli(["detect", str(cube_obj), "--config", str(cfg), "--seed", "5", "-o", str(out)]) == 0
    meta = json.loads(out.read_text())["meta"]
    assert (meta["R"], meta["min_votes"], meta["seed"]) == (2, 1, 5)


def test_unknown_flag(cube_obj, capsys):
    assert run_cli(["detect", str(cube_obj), "--frobnicate"]) == 1
    assert stderr_error(capsys)["error"] == "usage"


def test_missing_command(capsys):
    assert run_cli([]) == 1


def test_missing_mesh(tmp_path, capsys):
    assert run_cli(["detect", str(tmp_path / "nope.obj")]) == 1
    err = stderr_error(capsys)
    assert err["error"] == "input" and "nope.obj" in err["message"]


def test_malformed_mesh(tmp_path, capsys):
    p = tmp_path / "bad.obj"
    p.write_text("v 0 0 0\nf 1 2 3\n")
    assert run_cli(["detect", str(p)]) == 1


def test_open_mesh_rejected(tmp_path, capsys):
    p = tmp_path / "open.obj"
    objio.save_obj(shapes.l_shape(3), p)
    assert run_cli(["detect", str(p)]) == 1
    assert "closed" in stderr_error(capsys)["message"]


@pytest.mark.parametrize("text", ["{", '{"points": [{"vertex": 100000}]}', '{"points": 3}'])
def test_bad_points_file(tmp_path, cube_obj, text, capsys):
    p = tmp_path / "pts.json"
    p.write_text(text)
    assert run_cli(["cut", str(cube_obj), str(p), "-o", str(tmp_path / "c.obj")]) == 1
    assert stderr_error(capsys)["error"] == "input"


def test_bad_config_value(tmp_path, cube_obj, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("R = many\n")
    assert run_cli(["detect", str(cube_obj), "--config", str(cfg)]) == 1


def test_pipeline_failure_exit_code(cube_obj, monkeypatch, capsys):
    def broken(*args, **kwargs):
        raise param.FlipError("forced")

    monkeypatch.setattr(pipeline, "candidate_run", broken)
    assert run_cli(["detect", str(cube_obj), "--runs", "2"]) == 2
    err = stderr_error(capsys)
    assert err["error"] == "pipeline" and "0 of 2" in err["message"]


def test_module_entry_point(tmp_path, sphere_obj):
    proc = subprocess.run(
        [sys.executable, "-m", "distortion_points", "detect", str(sphere_obj), "--runs", "2"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["points"] == []
