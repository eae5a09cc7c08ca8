import json
import os

import numpy as np
import pytest

from adaptive_lab.cli import main
from adaptive_lab.config import (apply_overrides, build_experiment_config,
                                 default_config, dump_config, load_config)
from adaptive_lab.env import load_trajectory
from adaptive_lab.errors import ConfigError
from adaptive_lab.estimators import TargetSpec, one_step_estimate

CFG = os.path.join(os.path.dirname(__file__), "..", "configs", "mean_d1.cfg")


# ------------------------------------------------------------------- config


def test_load_config_defaults_and_file():
    cfg = load_config(None)
    assert cfg["policy"]["descriptor"] == "uniform"
    cfg = load_config(CFG)
    assert cfg["experiment"]["horizons"] == "400"
    assert cfg["estimator"]["lambda_h"] == "0"


def test_load_config_rejects_unknown_keys(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[experiment]\nhorizonz = 3\n")
    with pytest.raises(ConfigError):
        load_config(bad)
    bad.write_text("[mystery]\nx = 1\n")
    with pytest.raises(ConfigError):
        load_config(bad)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")


def test_apply_overrides():
    cfg = default_config()
    apply_overrides(cfg, ["experiment.replications=5", "env.sigma=0.25"])
    assert cfg["experiment"]["replications"] == "5"
    assert cfg["env"]["sigma"] == "0.25"
    for bad in ("nodot=1", "experiment.nope=1", "experiment.replications"):
        with pytest.raises(ConfigError):
            apply_overrides(default_config(), [bad])


def test_dump_config_is_reparsable(tmp_path):
    cfg = default_config()
    cfg["experiment"]["replications"] = "7"
    path = tmp_path / "dump.cfg"
    path.write_text(dump_config(cfg))
    assert load_config(path) == cfg


def test_build_experiment_config_errors():
    cfg = default_config()
    cfg["env"]["sigma"] = "lots"
    with pytest.raises(ConfigError):
        build_experiment_config(cfg)


# ---------------------------------------------------------------------- cli


def test_simulate_deterministic(tmp_path):
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    args = ["simulate", "--config", CFG, "--set",
            "simulate.n_trajectories=2", "--quiet"]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    for name in ("traj_0000.txt", "traj_0001.txt"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_simulate_estimate_round_trip(tmp_path):
    sim = tmp_path / "sim"
    est = tmp_path / "est"
    assert main(["simulate", "--config", CFG, "--out", str(sim),
                 "--quiet"]) == 0
    traj_file = sim / "traj_0000.txt"
    assert main(["estimate", "--config", CFG, "--out", str(est), "--quiet",
                 str(traj_file)]) == 0
    blob = json.loads((est / "estimate_traj_0000.json").read_text())
    # file boundary is lossless: matches the in-process estimate bit for bit
    traj = load_trajectory(traj_file)
    ref = one_step_estimate(traj, TargetSpec(nu=np.array([1.0])),
                            lambda_h=0.0, lambda_alpha=0.0)
    assert blob["psi_hat"] == ref.psi_hat
    assert blob["se"] == ref.se
    # one-step at lambda=0 on phi==1 is the sample mean
    assert abs(blob["psi_hat"] - np.mean(traj.outcomes)) < 1e-10


def test_estimate_zero_noise_recovers_truth(tmp_path):
    sim = tmp_path / "sim"
    est = tmp_path / "est"
    base = ["--config", CFG, "--set", "env.sigma=0"]
    assert main(["simulate", *base, "--out", str(sim), "--quiet"]) == 0
    assert main(["estimate", *base, "--out", str(est), "--quiet",
                 str(sim / "traj_0000.txt")]) == 0
    blob = json.loads((est / "estimate_traj_0000.json").read_text())
    assert abs(blob["psi_hat"] - 1.0) < 1e-8


def test_diagnose_outputs(tmp_path):
    sim = tmp_path / "sim"
    out = tmp_path / "diag"
    base = ["--config", CFG, "--set", "experiment.dims=2",
            "--set", "env.feature_kind=unit_sphere",
            "--set", "policy.descriptor=linucb(gamma=2.0)",
            "--set", "diagnostics.stabilizer=linucb"]
    assert main(["simulate", *base, "--out", str(sim), "--quiet"]) == 0
    assert main(["diagnose", *base, "--out", str(out), "--quiet",
                 str(sim / "traj_0000.txt")]) == 0
    blob = json.loads((out / "stability_traj_0000.json").read_text())
    assert "ds_stat" in blob and "remainder" in blob
    lines = (out / "stability.csv").read_text().strip().split("\n")
    assert len(lines) == 2


def test_coverage_command(tmp_path):
    out = tmp_path / "cov"
    assert main(["coverage", "--config", CFG, "--set",
                 "experiment.replications=40", "--out", str(out),
                 "--quiet"]) == 0
    lines = (out / "summary.csv").read_text().strip().split("\n")
    assert len(lines) == 2
    cov = float(lines[1].split(",")[4])
    assert 0.8 <= cov <= 1.0


def test_lan_check_command(tmp_path):
    out = tmp_path / "lan"
    assert main(["lan-check", "--set", "experiment.replications=30",
                 "--set", "experiment.horizons=400",
                 "--set", "experiment.dims=2",
                 "--set", "env.feature_kind=unit_sphere",
                 "--set", "lan.oracle_n_mc=30",
                 "--out", str(out), "--quiet"]) == 0
    blob = json.loads((out / "lan_report.json").read_text())
    assert blob["expected_mean"] == -0.5
    assert blob["replications"] == 30


def test_manifest_written_and_complete(tmp_path):
    out = tmp_path / "m"
    assert main(["coverage", "--config", CFG, "--set",
                 "experiment.replications=5", "--seed", "123",
                 "--out", str(out), "--quiet"]) == 0
    text = (out / "manifest.txt").read_text()
    assert "master_seed = 123" in text
    assert "replications = 5" in text  # overrides echoed into the manifest
    assert "command = coverage" in text


def test_exit_code_2_on_config_error(tmp_path, capsys):
    assert main(["coverage", "--set", "experiment.replications=none",
                 "--out", str(tmp_path / "x"), "--quiet"]) == 2
    assert main(["coverage", "--set", "bogus.key=1",
                 "--out", str(tmp_path / "y"), "--quiet"]) == 2
    assert "config error" in capsys.readouterr().err


def test_exit_code_3_on_data_error(tmp_path):
    assert main(["estimate", "--config", CFG, "--out", str(tmp_path / "e"),
                 "--quiet", str(tmp_path / "no_such_trajectory.txt")]) == 3
