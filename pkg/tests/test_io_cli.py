import csv
import json
import math
import os

import numpy as np
import pytest

from robinbubble import cli, defaults
from robinbubble.domain import Ball, StarShaped
from robinbubble.errors import ConfigError
from robinbubble.io import load_config, write_csv, write_json

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
BALL_CFG = os.path.join(ROOT, "configs", "ball.json")
STAR_CFG = os.path.join(ROOT, "configs", "star.json")


# ---------------------------------------------------------------- config

def test_load_sample_configs():
    b = load_config(BALL_CFG)
    assert isinstance(b.domain, Ball) and b.n == 400 and b.n_ansatz == 800
    assert b.lam == pytest.approx(1.4892288398906452)
    s = load_config(STAR_CFG)
    assert isinstance(s.domain, StarShaped) and s.lam is None
    assert s.solver_kw() == {"n": 400, "inflation": 1.0, "svd_cut": defaults.SVD_CUT}


def test_bare_domain_config():
    cfg = load_config('{"kind": "ball", "radius": 2.0}')
    assert cfg.domain.R == 2.0 and cfg.grid == defaults.SUP_GRID
    assert np.allclose(cfg.zeta, 0.0)


@pytest.mark.parametrize("text", [
    "not json", "[1, 2]", '{"solver": {}}', '{"kind": "cube"}',
    '{"domain": {"kind": "ball"}, "solver": {"inflation": -1}}',
    '{"domain": {"kind": "ball"}, "solver": {"n": 10}}',
    '{"domain": {"kind": "ball"}, "lambda": 0}',
    '{"domain": {"kind": "ball"}, "lambda": "abc"}',
    '{"domain": {"kind": "ball"}, "tolerances": {"lambda_star": 0}}',
])
def test_bad_configs(text):
    with pytest.raises(ConfigError):
        load_config(text)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(str(tmp_path / "nope.json"))


# ---------------------------------------------------------------- output

def test_csv_format(tmp_path):
    path = tmp_path / "sub" / "t.csv"
    write_csv(path, ["a", "b"], [(0.1, 1), {"a": 1 / 3, "b": "x"}])
    lines = path.read_text().splitlines()
    assert lines[0] == "a,b"
    assert lines[1] == "0.10000000000000001,1"
    assert float(lines[2].split(",")[0]) == 1 / 3
    assert not [p for p in os.listdir(path.parent) if p.startswith(".tmp-")]


def test_json_numpy_values(tmp_path):
    path = tmp_path / "t.json"
    write_json(path, {"a": np.array([1.0, 2.0]), "b": np.float64(0.5), "c": np.bool_(True)})
    assert json.loads(path.read_text()) == {"a": [1.0, 2.0], "b": 0.5, "c": True}


def test_atomic_write_keeps_old_file_on_failure(tmp_path):
    path = tmp_path / "t.json"
    write_json(path, {"ok": 1})
    with pytest.raises(TypeError):
        write_json(path, {"bad": object()})
    assert json.loads(path.read_text()) == {"ok": 1}
    assert os.listdir(tmp_path) == ["t.json"]


# ---------------------------------------------------------------- commands

def test_ball_analytic(capsys, tmp_path):
    assert cli.main(["ball-analytic", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    star = float(out.splitlines()[0].split("=")[1])
    assert abs(star - 1.43923) <= 5e-6
    assert abs(float(out.splitlines()[1].split("=")[1])) < 1e-10
    rows = dict(tuple(map(float, l.split(","))) for l in out.splitlines()[3:])
    assert rows[1.0] == pytest.approx(-1 / (4 * math.pi), rel=1e-15)
    data = json.loads((tmp_path / "ball_analytic.json").read_text())
    assert abs(data["root_residual"]) < 1e-10


def test_robin_map(tmp_path):
    args = ["robin-map", "--config", BALL_CFG, "--grid", "7", "--lambda", "1.0"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
    text_a = (tmp_path / "a" / "robin_map.csv").read_text()
    assert text_a == (tmp_path / "b" / "robin_map.csv").read_text()
    rows = list(csv.DictReader(text_a.splitlines()))
    assert list(rows[0]) == ["x", "y", "z", "g", "residual"]
    pts = np.array([[float(r[c]) for c in "xyz"] for r in rows])
    g = np.array([float(r["g"]) for r in rows])
    assert np.linalg.norm(pts[np.argmax(g)]) < 1e-12
    assert np.all(1.0 - np.linalg.norm(pts, axis=1) >= 0.02 * 2.0)


def test_robin_map_stdout(capsys):
    assert cli.main(["robin-map", "--config", STAR_CFG, "--grid", "4"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "x,y,z,g,residual" and len(lines) > 1


def test_energy_sweep(tmp_path, capsys):
    mus = "0.2,0.1,0.05"
    assert cli.main(["energy-sweep", "--config", BALL_CFG, "--mu-list", mus,
                     "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader((tmp_path / "energy_sweep.csv").read_text().splitlines()))
    assert [float(r["mu"]) for r in rows] == [0.2, 0.1, 0.05]
    assert list(rows[0]) == ["mu", "E_measured", "E_model", "remainder"]
    for r in rows:
        assert float(r["remainder"]) == pytest.approx(
            float(r["E_measured"]) - float(r["E_model"]), abs=1e-12)
    assert "slope" in json.loads((tmp_path / "energy_fit.json").read_text())


def test_config_errors_exit_one(tmp_path, capsys):
    assert cli.main(["robin-map", "--config", str(tmp_path / "missing.json")]) == 1
    assert "not found" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert cli.main(["verify", "--config", str(bad)]) == 1
    assert cli.main(["energy-sweep", "--config", STAR_CFG]) == 1         # no lambda
    assert cli.main(["energy-sweep", "--config", BALL_CFG, "--mu-list", "a,b"]) == 1


def test_parser_requires_config():
    with pytest.raises(SystemExit):
        cli.main(["robin-map"])


@pytest.mark.slow
def test_lambda_star_command(tmp_path, capsys):
    assert cli.main(["lambda-star", "--config", BALL_CFG, "--out", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "lambda_star.json").read_text())
    assert abs(data["lambda_star"] - 1.43923) <= 1e-3
    assert data["meta"]["seed"] == defaults.SEED
    hist = (tmp_path / "lambda_star_history.csv").read_text().splitlines()
    assert hist[0] == "lambda,M" and len(hist) == len(data["history"]) + 1


@pytest.mark.slow
def test_verify_ball_passes(tmp_path, capsys):
    assert cli.main(["verify", "--config", BALL_CFG, "--out", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "verify.json").read_text())
    assert data["checks"] and all(c["passed"] for c in data["checks"])


def test_verify_reports_failures(monkeypatch, capsys):
    monkeypatch.setattr(cli, "run_checks", lambda cfg, lam=None, mus=None: [
        {"check": "x", "passed": False, "detail": "forced"}])
    assert cli.main(["verify", "--config", BALL_CFG]) == 2
    assert "FAIL  x: forced" in capsys.readouterr().out
