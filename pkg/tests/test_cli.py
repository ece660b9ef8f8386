import csv
import io
import json
import subprocess
import sys

import pytest

from levypen.cli import main


def run(tmp_path, command, cfg, *extra):
    path = tmp_path / f"{command}.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    code = main([command, "--config", str(path), "--out", str(out), *extra])
    return code, out


def test_hfun_csv(tmp_path):
    code, out = run(tmp_path, "hfun", {"model": {"kind": "bm"}, "x_grid": [0.0, 1.0, -2.0], "gamma": 1.0})
    assert code == 0
    rows = list(csv.DictReader(io.StringIO((out / "hfun.csv").read_text())))
    assert [float(r["h"]) for r in rows] == pytest.approx([0.0, 1.0, 2.0], abs=1e-9)
    assert float(rows[1]["h_gamma"]) == pytest.approx(2.0, abs=1e-9)


def test_hit_json(tmp_path):
    code, out = run(tmp_path, "hit", {"model": {"kind": "bm"}, "x": 0.5, "points": [0.0, 1.0, 3.0]})
    assert code == 0
    res = json.loads((out / "hit.json").read_text())
    assert res["probs"] == pytest.approx([0.5, 0.5, 0.0], abs=1e-9)
    assert res["method"] == "solve"


def test_phi_outputs(tmp_path):
    cfg = {"model": {"kind": "bm"}, "points": [0.0, 1.0], "weights": [1.0, 1.0], "x_grid": [0.0, 0.5, 1.0]}
    code, out = run(tmp_path, "phi", cfg)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO((out / "phi.csv").read_text())))
    assert [float(r["phi"]) for r in rows] == pytest.approx([0.5] * 3, abs=1e-9)
    summary = json.loads((out / "phi.json").read_text())
    assert summary["a_vec"] == pytest.approx([0.5, 0.5], abs=1e-10)


@pytest.mark.parametrize("model", [{"kind": "bm"}, {"kind": "stable", "alpha": 1.5},
                                   {"kind": "bm_cp", "sigma": 1.0, "rate": 0.5, "jump_decay": 2.0}])
def test_verify_passes(tmp_path, model):
    code, out = run(tmp_path, "verify", {"model": model})
    rep = json.loads((out / "verify.json").read_text())
    assert code == 0 and rep["failed"] == 0 and rep["passed"] > 100
    assert {"id", "reference", "status", "observed", "expected", "tolerance"} <= set(rep["checks"][0])


def test_identity_reports_failure_with_impossible_tolerance(tmp_path):
    code, out = run(tmp_path, "identity", {"model": {"kind": "bm_cp", "rate": 1.0}, "tolerance": 1e-18})
    rep = json.loads((out / "identity.json").read_text())
    assert code == 1 and rep["failed"] > 0


def test_simulate_martingale(tmp_path):
    cfg = {"model": {"kind": "bm"}, "problem": {"points": [0.0, 1.0], "weights": [1.0, 1.0]},
           "x": 0.5, "task": "martingale", "n_paths": 4000}
    code, out = run(tmp_path, "simulate", cfg, "--seed", "3")
    res = json.loads((out / "simulate.json").read_text())
    assert code == 0 and res["seed"] == 3 and len(res["estimate"]) == 3


def test_simulate_sweep_csv(tmp_path):
    cfg = {"model": {"kind": "bm"}, "problem": {"points": [0.0], "weights": [1.0]}, "x": 0.0,
           "task": "sweep", "n_paths": 4000, "clocks": [{"kind": "one_hit", "b": 4}, {"kind": "one_hit", "b": 16}]}
    code, out = run(tmp_path, "simulate", cfg)
    rows = list(csv.DictReader(io.StringIO((out / "sweep.csv").read_text())))
    assert len(rows) == 2 and code in (0, 1)


def test_simulate_seed_reproducible(tmp_path):
    cfg = {"model": {"kind": "bm"}, "problem": {"points": [0.0], "weights": [1.0]}, "x": 0.0,
           "task": "expectation", "clock": {"kind": "exponential", "q": 1.0}, "n_paths": 1000, "seed": 5}
    _, out = run(tmp_path, "simulate", cfg)
    a = (out / "simulate.json").read_text()
    _, out = run(tmp_path, "simulate", cfg)
    assert (out / "simulate.json").read_text() == a


@pytest.mark.parametrize("command,cfg", [
    ("phi", {"model": {"kind": "bm"}, "points": [0.0], "weights": [1.0], "x_grid": [0.0], "gamma": 2}),
    ("hfun", {"model": {"kind": "bm"}}),
    ("hfun", {"model": {"kind": "bm"}, "x_grid": [0.0], "bogus": 1}),
    ("hfun", {"model": {"kind": "stable", "alpha": 0.5}, "x_grid": [1.0]}),
    ("phi", {"model": {"kind": "bm"}, "points": [0.0, 0.0], "weights": [1.0, 1.0], "x_grid": [0.0]}),
    ("simulate", {"model": {"kind": "bm"}, "problem": {"points": [0.0], "weights": [1.0]}, "x": 0.0,
                  "task": "sweep"}),
])
def test_bad_input_exits_2(tmp_path, command, cfg):
    code, _ = run(tmp_path, command, cfg)
    assert code == 2


def test_missing_config_exits_2(tmp_path):
    assert main(["hfun", "--config", str(tmp_path / "nope.json")]) == 2


def test_module_entry_point(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"model": {"kind": "bm"}, "x_grid": [1.0]}))
    proc = subprocess.run([sys.executable, "-m", "levypen", "hfun", "--config", str(path)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.startswith("x,h,h_gamma,h_B")
