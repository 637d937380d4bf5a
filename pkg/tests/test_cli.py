"""Command-line subcommands, outputs and exit codes."""

import csv
import subprocess
import sys

import numpy as np
import pytest

from rto2d.cli import main

from conftest import CONFIGS, load_json, tiny_config, write_json


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def optimized(tmp_path_factory):
    d = tmp_path_factory.mktemp("opt")
    cfg = write_json(d / "tiny.json", tiny_config())
    out = d / "out"
    assert main(["optimize", "--config", str(cfg), "--out", str(out)]) == 0
    return cfg, out


def test_optimize_writes_the_standard_outputs(optimized):
    _, out = optimized
    for name in ("history.csv", "design.csv", "design.pgm", "mesh.vtk"):
        assert (out / name).is_file()
    hist = _rows(out / "history.csv")
    assert len(hist) == 4 and list(hist[0]) == ["iter", "p", "p_l", "beta", "c_max_this_iter",
                                                "objective", "mean", "std", "constraint"]
    assert len(_rows(out / "design.csv")) == 64


def test_snapshots_and_eigenmodes(tmp_path):
    data = tiny_config()
    data["run"]["snapshot_interval"] = 2
    data["uncertainty"]["material"] = {"mean": 0.85, "variance": 0.01, "lcx": 100.0,
                                       "lcy": 100.0, "n_modes": 2}
    cfg = write_json(tmp_path / "c.json", data)
    assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    snaps = sorted(p.name for p in (tmp_path / "o" / "snapshots").iterdir())
    assert snaps == ["design_00000.csv", "design_00000.pgm", "design_00002.csv",
                     "design_00002.pgm"]
    assert (tmp_path / "o" / "material_modes.csv").is_file()
    assert (tmp_path / "o" / "material_mode_2.pgm").is_file()


def test_analyze_a_saved_design(optimized, tmp_path):
    cfg, out = optimized
    assert main(["analyze", "--config", str(cfg), "--design", str(out / "design.csv"),
                 "--out", str(tmp_path)]) == 0
    row = _rows(tmp_path / "analysis.csv")[0]
    assert float(row["std"]) > 0.0
    assert float(row["objective"]) == pytest.approx(float(row["mean"]) + float(row["std"]))


def test_evaluate_eigenmode_sweep(optimized, tmp_path):
    _, out = optimized
    data = tiny_config()
    data["uncertainty"]["material"] = {"mean": 0.85, "variance": 0.0625, "lcx": 200.0,
                                       "lcy": 200.0}
    cfg = write_json(tmp_path / "m.json", data)
    code = main(["evaluate", "--config", str(cfg), "--design", str(out / "design.csv"),
                 "--source", "material", "--eigenmode", "2", "--coeff-range", "-10:10:21",
                 "--out", str(tmp_path)])
    assert code == 0
    rows = _rows(tmp_path / "evaluate_material_mode2.csv")
    assert len(rows) == 21
    assert float(rows[0]["coefficient"]) == -10.0 and float(rows[-1]["coefficient"]) == 10.0
    comp = np.array([float(r["compliance"]) for r in rows])
    assert np.all(comp > 0)


def test_evaluate_at_a_given_realization(optimized, tmp_path):
    cfg, out = optimized
    args = ["evaluate", "--config", str(cfg), "--design", str(out / "design.csv"),
            "--out", str(tmp_path)]
    assert main(args + ["--xi", "0,0"]) == 0
    f0 = float(_rows(tmp_path / "evaluate.csv")[0]["compliance"])
    assert main(args + ["--xi", "1.5,0"]) == 0
    f1 = float(_rows(tmp_path / "evaluate.csv")[0]["compliance"])
    assert f0 > 0 and f1 != f0
    assert main(args + ["--xi", "1,2,3"]) == 2
    assert main(args + ["--source", "geometry"]) == 2
    assert main(args + ["--source", "load", "--coeff-range", "1:2"]) == 2


def test_grad_verify_on_a_tiny_problem(tmp_path):
    data = tiny_config(nx=4, ny=4)
    data["solver"] = {"tol": 1e-12}
    cfg = write_json(tmp_path / "g.json", data)
    assert main(["grad-verify", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "grad_verify.csv")
    assert len(rows) == 16
    rel = np.array([float(r["rel_err"]) for r in rows])
    g = np.array([abs(float(r["g_cdm"])) for r in rows])
    # judge elements that carry a meaningful share of the gradient
    assert np.max(rel[g > 1e-3 * g.max()]) < 1e-4


def test_uq_verify_table(tmp_path):
    data = load_json("verification_beam_native.json")
    data["run"]["mc_samples"] = 20
    data["run"]["sigma_values"] = [1.0, 4.0]
    cfg = write_json(tmp_path / "b.json", data)
    assert main(["uq-verify", "--config", str(cfg), "--out", str(tmp_path), "--seed", "7"]) == 0
    rows = _rows(tmp_path / "uq_verify.csv")
    assert [r["sigma_P"] for r in rows] == ["1.0", "4.0"]
    assert all(r["seed"] == "7" and r["n_samples"] == "20" for r in rows)


def test_configuration_errors_exit_2(tmp_path, capsys):
    data = tiny_config()
    data["design"]["bogus"] = 1
    cfg = write_json(tmp_path / "bad.json", data)
    assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "line" in capsys.readouterr().err
    assert main(["optimize", "--config", str(tmp_path / "none.json")]) == 2
    good = write_json(tmp_path / "ok.json", tiny_config())
    assert main(["optimize", "--config", str(good), "--threads", "0"]) == 2


def test_solver_failure_exits_3_with_checkpoint(tmp_path, capsys):
    data = tiny_config()
    data["load"]["mean"] = [0.0, -50.0]
    data["solver"] = {"max_iter": 1, "min_step": 0.5, "c_max": 0.1}
    cfg = write_json(tmp_path / "f.json", data)
    assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
    assert (tmp_path / "o" / "checkpoint.csv").is_file()
    assert "checkpoint" in capsys.readouterr().err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "rto2d", "--help"], capture_output=True,
                         text=True, check=True)
    for cmd in ("optimize", "analyze", "uq-verify", "grad-verify", "evaluate"):
        assert cmd in res.stdout


def test_shipped_configs_dir_exists():
    assert (CONFIGS / "compression_block_deterministic_reduced.json").is_file()
