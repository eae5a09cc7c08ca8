"""Command-line driver: simulate / estimate / diagnose / coverage / lan-check.

Every subcommand reads one config file (plus repeatable --set overrides),
writes its outputs into --out, and drops a manifest recording the resolved
configuration, tool version, and master seed so the directory can be
reproduced exactly.

Exit codes: 0 success, 2 configuration error, 3 data/runtime error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from . import diagnostics as diag
from .config import (apply_overrides, build_experiment_config, dump_config,
                     load_config)
from .env import (generate_trajectory, load_trajectory,
                  pooled_design_oracle, save_trajectory)
from .errors import AdaptiveLabError, ConfigError
from .estimators import CSV_COLUMNS, one_step_estimate, plugin_ols_estimate
from .harness import (build_environment, build_target, default_workers,
                      resolve_lambda, resolve_policy, run_experiment)
from .linalg import pseudo_inverse_apply
from .rng import derive_seed


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adaptive-lab",
        description="Simulation and estimation toolkit for adaptively "
                    "collected linear bandit data.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (("simulate", "generate and store trajectory files"),
                      ("estimate", "run estimators on stored trajectories"),
                      ("diagnose", "compute stability reports on stored "
                                   "trajectories"),
                      ("coverage", "run a full Monte Carlo coverage study"),
                      ("lan-check", "check the local-likelihood-ratio limit")):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", default=None, help="config file path")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="SECTION.KEY=VALUE",
                       help="override a config value (repeatable)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--workers", type=int, default=None,
                       help="worker processes (default: ADAPTIVE_LAB_WORKERS "
                            "or 1)")
        p.add_argument("--seed", type=int, default=None,
                       help="override experiment.master_seed")
        q = p.add_mutually_exclusive_group()
        q.add_argument("--quiet", action="store_true")
        q.add_argument("--verbose", action="store_true")
        if name in ("estimate", "diagnose"):
            p.add_argument("trajectories", nargs="+",
                           help="trajectory file(s) to process")
    return parser


def _resolved(args) -> dict:
    cfg = apply_overrides(load_config(args.config), args.overrides)
    if args.seed is not None:
        cfg["experiment"]["master_seed"] = str(args.seed)
    return cfg


def _write_manifest(out_dir: str, command: str, cfg: dict) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "manifest.txt"), "w") as fh:
        fh.write(f"tool = adaptive-lab {__version__}\n")
        fh.write(f"command = {command}\n")
        fh.write(f"master_seed = {cfg['experiment']['master_seed']}\n\n")
        fh.write(dump_config(cfg))


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _single_cell(ec):
    if len(ec.horizons) != 1 or len(ec.dims) != 1:
        raise ConfigError("this command needs exactly one horizon and one dim")
    return ec.horizons[0], ec.dims[0]


def _cell_pieces(cfg: dict):
    ec = build_experiment_config(cfg)
    T, d = _single_cell(ec)
    env = build_environment(ec, d)
    policy = resolve_policy(ec, T, d)
    target = build_target(ec, env.beta0)
    return ec, T, d, env, policy, target


def cmd_simulate(args) -> int:
    cfg = _resolved(args)
    ec, T, d, env, policy, _ = _cell_pieces(cfg)
    n = int(cfg["simulate"]["n_trajectories"])
    if n < 1:
        raise ConfigError("simulate.n_trajectories must be >= 1")
    _write_manifest(args.out, "simulate", cfg)
    for rep in range(n):
        traj = generate_trajectory(env, policy, T,
                                   derive_seed(ec.master_seed, 0, rep))
        save_trajectory(traj, os.path.join(args.out, f"traj_{rep:04d}.txt"))
    _say(args, f"wrote {n} trajectory file(s) to {args.out}")
    return 0


def cmd_estimate(args) -> int:
    cfg = _resolved(args)
    ec, _, _, env, policy, _ = _cell_pieces(cfg)
    _write_manifest(args.out, "estimate", cfg)
    csv_path = os.path.join(args.out, "estimates.csv")
    with open(csv_path, "w") as csv_fh:
        csv_fh.write(",".join(CSV_COLUMNS) + "\n")
        for path in args.trajectories:
            traj = load_trajectory(path)
            target = build_target(ec, env.beta0)
            if ec.estimator == "plugin_ols":
                report = plugin_ols_estimate(traj, target, level=ec.level)
            else:
                lam_h = resolve_lambda(ec.lambda_h, traj.horizon, traj.dim,
                                       allow_auto=True)
                lam_a = resolve_lambda(ec.lambda_alpha, traj.horizon,
                                       traj.dim, allow_auto=False)
                report = one_step_estimate(traj, target, lambda_h=lam_h,
                                           lambda_alpha=lam_a,
                                           variance_method=ec.variance_method,
                                           level=ec.level)
            stem = os.path.splitext(os.path.basename(path))[0]
            with open(os.path.join(args.out, f"estimate_{stem}.json"),
                      "w") as fh:
                fh.write(report.to_json() + "\n")
            csv_fh.write(report.csv_row(traj.seed, traj.horizon, traj.dim,
                                        policy.describe()) + "\n")
            if args.verbose:
                _say(args, f"{path}: psi_hat={report.psi_hat:.6g} "
                           f"se={report.se:.6g}")
    _say(args, f"wrote {len(args.trajectories)} estimate(s) to {args.out}")
    return 0


def cmd_diagnose(args) -> int:
    cfg = _resolved(args)
    ec, T, d, env, policy, target = _cell_pieces(cfg)
    if ec.stabilizer == "none":
        raise ConfigError("diagnose needs diagnostics.stabilizer = "
                          "linucb or oracle")
    if ec.stabilizer == "linucb":
        gamma = getattr(policy, "gamma", 0.0)
        stab = diag.linucb_target_matrix(env.beta0, T, d, gamma)
    else:
        gamma = getattr(policy, "gamma", 0.0)
        stab = diag.StabilizerMatrix(
            matrix=pooled_design_oracle(env, policy, T, ec.oracle_n_mc,
                                        derive_seed(ec.master_seed, 1)),
            source=diag.SOURCE_ORACLE_SIGMA_BAR)
    _write_manifest(args.out, "diagnose", cfg)
    csv_path = os.path.join(args.out, "stability.csv")
    with open(csv_path, "w") as csv_fh:
        csv_fh.write(",".join(diag.STABILITY_CSV_COLUMNS) + "\n")
        for path in args.trajectories:
            traj = load_trajectory(path)
            lam_h = resolve_lambda(ec.lambda_h, traj.horizon, traj.dim,
                                   allow_auto=True)
            if lam_h is None:
                lam_h = 1.0 / traj.horizon
            lam_a = resolve_lambda(ec.lambda_alpha, traj.horizon, traj.dim,
                                   allow_auto=False)
            report = diag.compute_stability_report(
                traj, target, lam_h, lam_a, stab, env.beta0, ec.sigma,
                lindeberg_eps=ec.lindeberg_eps)
            stem = os.path.splitext(os.path.basename(path))[0]
            with open(os.path.join(args.out, f"stability_{stem}.json"),
                      "w") as fh:
                fh.write(report.to_json() + "\n")
            csv_fh.write(report.csv_row(traj.seed, traj.horizon, traj.dim,
                                        policy.describe(), gamma) + "\n")
    _say(args, f"wrote {len(args.trajectories)} stability report(s) "
               f"to {args.out}")
    return 0


def cmd_coverage(args, workers: int) -> int:
    cfg = _resolved(args)
    ec = build_experiment_config(cfg)
    _write_manifest(args.out, "coverage", cfg)
    rows = run_experiment(ec, out_dir=args.out, workers=workers)
    for row in rows:
        _say(args, f"T={row.T} d={row.d} coverage={row.coverage:.4f} "
                   f"rmse={row.rmse:.6g} n_failed={row.n_failed}")
    return 0


def cmd_lan_check(args, workers: int) -> int:
    del workers  # replication loop is cheap relative to the oracle
    cfg = _resolved(args)
    ec, T, d, env, policy, target = _cell_pieces(cfg)
    epsilon = float(cfg["lan"]["epsilon"])
    n_mc = int(cfg["lan"]["oracle_n_mc"])
    sigma_bar_gram = pooled_design_oracle(env, policy, T, n_mc,
                                          derive_seed(ec.master_seed, 1))
    alpha_bar = pseudo_inverse_apply(sigma_bar_gram, target.nu)
    sb = diag.sigma_bar(target, sigma_bar_gram, ec.sigma)
    stats = np.zeros(ec.replications)
    n_nonpos = 0
    for rep in range(ec.replications):
        traj = generate_trajectory(env, policy, T,
                                   derive_seed(ec.master_seed, 0, rep))
        stats[rep], bad = diag.lan_statistic_detailed(
            traj, target, sb, alpha_bar, env.beta0, ec.sigma, epsilon)
        n_nonpos += bad
    mean, var = float(np.mean(stats)), float(np.var(stats, ddof=1))
    mc_se = math.sqrt(var / ec.replications)
    report = {"T": T, "d": d, "epsilon": epsilon, "sigma_bar_mc": sb,
              "replications": ec.replications, "mean": mean, "variance": var,
              "mean_mc_se": mc_se, "expected_mean": -0.5 * epsilon**2,
              "expected_variance": epsilon**2,
              "n_nonpositive_factors": n_nonpos}
    _write_manifest(args.out, "lan-check", cfg)
    with open(os.path.join(args.out, "lan_report.json"), "w") as fh:
        json.dump(report, fh, indent=2)
    _say(args, f"mean={mean:.4f} (target {-0.5 * epsilon**2:.4f} "
               f"± {3 * mc_se:.4f}), variance={var:.4f} "
               f"(target {epsilon**2:.4f})")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    workers = args.workers if args.workers is not None else default_workers()
    try:
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "estimate":
            return cmd_estimate(args)
        if args.command == "diagnose":
            return cmd_diagnose(args)
        if args.command == "coverage":
            return cmd_coverage(args, workers)
        return cmd_lan_check(args, workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (AdaptiveLabError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
