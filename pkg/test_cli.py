"""
Tests for the tfch command line and the experiment runner
"""
import csv
import json
from pathlib import Path

import numpy as np
import pytest

from controllers.experiment_controller import ExperimentController
from errors import ConfigError
from main import build_parser, main, run_spec
from models.config_models import MeshMode
from models.report_models import Command
import settings

CONFIGS = Path(__file__).parent / "configs"

TINY_RUN = """
[model]
alpha = 0.5
kappa = 0.01
eps = 0.05

[grid]
Mx = 16
My = 16

[mesh]
mode = uniform
T = 0.05
tau_max = 0.01

[solver]
initial = random
amplitude = 0.05

[output]
snapshot_times = 0.02
"""

TINY_CONVERGE = """
[model]
alpha = 0.5
kappa = 1.0
eps = 0.5

[grid]
Mx = 8
My = 8

[mesh]
T0 = 0.01
N0 = 6

[converge]
T = 1.0
gamma = 2.0
N_base = 10
refinements = 2

[solver]
initial = zero
"""

TINY_COMPAT = """
[model]
kappa = 1.0
eps = 0.5

[grid]
Mx = 16
My = 16

[mesh]
mode = uniform
T = 0.2

[solver]
initial = smooth
amplitude = 0.5
"""


def write_config(tmp_path, text: str, name: str = "run.cfg") -> str:
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_csv(path):
    with open(path) as handle:
        return list(csv.DictReader(handle))


def test_run_spec_records_the_invocation():
    spec = run_spec(build_parser().parse_args(["simulate", "--preset", "ex2-desk", "--outdir", "runs/a05"]))
    assert spec.command == Command.SIMULATE
    assert spec.preset == "ex2-desk"
    assert spec.output == "runs/a05"
    assert spec.seed == ExperimentController.preset("ex2-desk").solver.seed
    override = run_spec(build_parser().parse_args(["simulate", "--preset", "ex2-desk", "--seed", "5"]))
    assert override.seed == 5
    verify = run_spec(build_parser().parse_args(["verify", "--seed", "9"]))
    assert (verify.command, verify.seed, verify.output) == (Command.VERIFY, 9, "report.json")
    assert run_spec(build_parser().parse_args(["verify"])).seed == settings.DEFAULT_SEED


def test_run_spec_records_the_configured_seed(tmp_path):
    config = write_config(tmp_path, TINY_RUN.replace("initial = random", "initial = random\nseed = 17"))
    spec = run_spec(build_parser().parse_args(["simulate", "--config", config]))
    assert spec.seed == 17


def test_simulate_seed_override(tmp_path):
    config = write_config(tmp_path, TINY_RUN)
    energies = {}
    for name, extra in (("default", []), ("same", ["--seed", "42"]), ("other", ["--seed", "3"])):
        outdir = tmp_path / name
        assert main(["simulate", "--config", config, "--outdir", str(outdir)] + extra) == 0
        energies[name] = [row["E"] for row in read_csv(outdir / "ledger.csv")]
    assert energies["same"] == energies["default"]
    assert energies["other"] != energies["default"]
    assert ExperimentController.resolve_config(config, seed=3).solver.seed == 3


def test_bounds_command(tmp_path):
    out = tmp_path / "bounds.csv"
    assert main(["bounds", "--alphas", "0.1:0.9:5", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert [float(r["alpha"]) for r in rows] == pytest.approx([0.1, 0.3, 0.5, 0.7, 0.9])
    for row in rows:
        assert float(row["r_star"]) >= 4.659
        assert float(row["gamma_max"]) > float(row["three_minus_alpha"])


def test_bounds_rejects_bad_alpha_grid(tmp_path):
    assert main(["bounds", "--alphas", "0.5,1.5", "--out", str(tmp_path / "b.csv")]) == 1
    with pytest.raises(ConfigError):
        ExperimentController.parse_alpha_grid("0.1:0.9")


def test_verify_command_writes_a_passing_report(tmp_path):
    out = tmp_path / "report.json"
    assert main(["verify", "--seed", "7", "--trials", "20", "--oracle-trials", "2", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["passed"] is True
    assert report["seed"] == 7
    for name in ("kernel_oracle", "dgs_telescoping", "dgs_nonlocal", "dgs_local", "dgs_full"):
        assert report["suites"][name]["violations"] == 0
        assert report["suites"][name]["checks"] > 0


def test_verify_flags_an_injected_bad_mesh(tmp_path):
    out = tmp_path / "report.json"
    code = main(
        ["verify", "--trials", "10", "--oracle-trials", "1", "--inject-bad-mesh", "--out", str(out)]
    )
    assert code == 0
    suite = json.loads(out.read_text())["suites"]["injected_bad_mesh"]
    assert suite["skipped"] == 1
    assert suite["violations"] == 0


def test_load_shipped_configs():
    config = ExperimentController.load_config(CONFIGS / "ex2.cfg")
    assert config.mesh.mode == MeshMode.ADAPTIVE
    assert config.mesh.ratio_cap is None
    assert config.output.snapshot_times == [10.0, 30.0, 50.0, 100.0]
    ex1 = ExperimentController.load_config(CONFIGS / "ex1.cfg")
    assert ex1.model.alpha == 0.4
    assert ex1.converge.refinements == 6


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentController.load_config(write_config(tmp_path, "[model]\nalpha = 0.5\nbeta = 1\n"))
    with pytest.raises(ConfigError):
        ExperimentController.load_config(write_config(tmp_path, "[physics]\nalpha = 0.5\n"))
    with pytest.raises(ConfigError):
        ExperimentController.load_config(write_config(tmp_path, "[model]\nalpha = 1.5\n"))
    with pytest.raises(ConfigError):
        ExperimentController.load_config(tmp_path / "absent.cfg")
    with pytest.raises(ConfigError):
        ExperimentController.preset("ex3")


def test_bad_config_exits_with_one(tmp_path):
    bad = write_config(tmp_path, "[model]\nalpha = 0.5\nbeta = 1\n")
    assert main(["simulate", "--config", bad, "--outdir", str(tmp_path / "run")]) == 1


def test_alpha_override():
    config = ExperimentController.resolve_config(preset="ex1", alpha=0.7)
    assert config.model.alpha == 0.7
    assert config.model.kappa == 1.0
    with pytest.raises(ConfigError):
        ExperimentController.resolve_config(preset="ex1", alpha=2.0)


def test_simulate_command_writes_run_directory(tmp_path):
    outdir = tmp_path / "run"
    assert main(["simulate", "--config", write_config(tmp_path, TINY_RUN), "--outdir", str(outdir)]) == 0
    ledger = read_csv(outdir / "ledger.csv")
    assert len(ledger) == 6
    assert float(ledger[-1]["t"]) == pytest.approx(0.05)
    assert len(read_csv(outdir / "steps.csv")) == 5
    assert len(read_csv(outdir / "mesh.csv")) == 6
    snapshot = json.loads((outdir / "snapshots" / "phi_t0.02.json").read_text())
    assert snapshot["t"] == pytest.approx(0.02)
    assert (outdir / "snapshots" / "phi_t0.02.bin").stat().st_size == 16 * 16 * 8
    summary = json.loads((outdir / "summary.json").read_text())
    assert summary["steps"] == 5
    assert summary["volume_drift"] <= 1e-12
    assert summary["ratio_violations"] == 0
    assert summary["e_alpha_increases_under_bound"] == 0


def test_simulate_bdf2_reference(tmp_path):
    outdir = tmp_path / "bdf2"
    args = ["simulate", "--config", write_config(tmp_path, TINY_RUN), "--scheme", "bdf2", "--outdir", str(outdir)]
    assert main(args) == 0
    assert json.loads((outdir / "summary.json").read_text())["scheme"] == "bdf2"


def test_kernels_command(tmp_path):
    out = tmp_path / "kernels.csv"
    config = write_config(tmp_path, TINY_CONVERGE)
    assert main(["kernels", "--config", config, "--up-to", "5", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 15
    assert (rows[-1]["n"], rows[-1]["k"]) == ("5", "5")
    assert main(["kernels", "--config", config, "--up-to", "50", "--out", str(out)]) == 1


def test_kernels_from_simulated_mesh(tmp_path):
    outdir = tmp_path / "run"
    main(["simulate", "--config", write_config(tmp_path, TINY_RUN), "--outdir", str(outdir)])
    out = tmp_path / "kernels.csv"
    assert main(["kernels", "--mesh-csv", str(outdir / "mesh.csv"), "--out", str(out)]) == 0
    assert len(read_csv(out)) == 15


def test_converge_command(tmp_path):
    out = tmp_path / "conv.csv"
    assert main(["converge", "--config", write_config(tmp_path, TINY_CONVERGE), "--out", str(out)]) == 0
    rows = read_csv(out)
    assert [int(r["N"]) for r in rows] == [10, 20]
    assert rows[0]["order"] == ""
    assert float(rows[1]["error"]) < float(rows[0]["error"])
    assert float(rows[0]["expected_order"]) == pytest.approx(2.0)
    assert float(rows[0]["tau_max"]) == pytest.approx(1.0 - 0.9 ** 2)


def test_compat_command(tmp_path):
    out = tmp_path / "compat.csv"
    config = write_config(tmp_path, TINY_COMPAT)
    assert main(["compat", "--config", config, "--alphas", "0.9,0.99", "--N", "10", "--out", str(out)]) == 0
    rows = read_csv(out)
    distances = [float(r["distance"]) for r in rows]
    assert distances[0] > distances[1]
    peaks = [float(r["max_abs_a_hat"]) for r in rows]
    assert all(np.isfinite(peaks))
    assert peaks[0] > peaks[1]


@pytest.mark.slow
def test_desk_coarsening_run_preserves_structure(tmp_path):
    summary = ExperimentController.run_simulation(ExperimentController.preset("ex2-desk"), tmp_path)
    assert summary["t_final"] == pytest.approx(100.0, rel=1e-9)
    assert summary["volume_drift"] <= 1e-12
    assert summary["ratio_violations"] == 0
    assert summary["e_alpha_increases_under_bound"] == 0
    for t in (10, 30, 50, 100):
        assert (tmp_path / "snapshots" / f"phi_t{t}.bin").exists()


@pytest.mark.slow
def test_compat_preset_distances_shrink():
    config = ExperimentController.preset("compat")
    rows = ExperimentController.run_compat(config, [0.9, 0.99, 0.999], 100)
    distances = [row.distance for row in rows]
    assert distances[0] > distances[1] > distances[2]
    peaks = [row.max_abs_a_hat for row in rows]
    assert peaks[0] > peaks[1] > peaks[2]
