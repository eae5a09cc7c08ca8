"""Seeded, replication-parallel Monte Carlo engine.

Every (cell, replication) task derives its own stream seed, so results are
identical regardless of worker count or scheduling order.  Failures inside a
replication (singular OLS cells etc.) are recorded with a reason code and
excluded from aggregates.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import diagnostics as diag
from .env import Environment, generate_trajectory, pooled_design_oracle
from .errors import (AdaptiveLabError, ConfigError, OutputIOError,
                     TooFewSamples)
from .estimators import (TargetSpec, one_step_estimate, plugin_ols_estimate,
                         VARIANCE_EMPIRICAL_IF)
from .features import (KIND_CONTEXT_ARM, KIND_TABULAR, KIND_UNIT_SPHERE,
                       context_arm_basis, tabular_arms, unit_sphere_arms)
from .policies import LinUCBPolicy, exploration_schedule, parse_policy
from .rng import derive_seed

RECORD_COLUMNS = (
    "cell", "rep", "seed", "T", "d", "policy", "target_rule", "truth",
    "status", "psi_hat", "psi_plugin", "correction", "se", "ci_low",
    "ci_high", "sigma_hat", "lambda_h", "lambda_alpha", "variance_method",
    "ds_stat", "riesz_dist", "riesz_dist_normalized", "lindeberg",
    "riesz_err", "outcome_err", "bias_term", "r_total", "threshold",
    "sigma_tilde", "top_alignment", "bulk_ratio_median", "trace_check",
)

SUMMARY_COLUMNS = ("T", "d", "policy", "target_rule", "coverage",
                   "mean_ci_width", "rmse", "bias", "ks_stat", "ks_pvalue",
                   "median_ds_stat", "median_riesz_dist_norm",
                   "median_remainder_ratio", "n_failed")


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("ADAPTIVE_LAB_WORKERS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class ExperimentConfig:
    feature_kind: str
    sigma: float
    policy: str
    horizons: tuple
    dims: tuple
    replications: int
    master_seed: int
    n_arms: int = 2
    noise_kind: str = "gaussian"
    beta0_kind: str = "e1"          # e1 | ones | fixed
    beta0_scale: float = 1.0
    beta0_fixed: tuple = field(default=())
    target_rule: str = "aligned"    # aligned | orthogonal | fixed
    target_fixed: tuple = field(default=())
    lambda_h: str = "auto"          # auto | 0 | 1/T | d/T | 1/sqrtT | number
    lambda_alpha: str = "1/T"       # 1/T | 0 | number
    estimator: str = "one_step"     # one_step | plugin_ols
    variance_method: str = VARIANCE_EMPIRICAL_IF
    level: float = 0.95
    stabilizer: str = "none"        # none | linucb | oracle
    oracle_n_mc: int = 500
    lindeberg_eps: float = 0.01
    anisotropy: bool = False

    def validate(self) -> None:
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if not self.horizons or list(self.horizons) != sorted(set(self.horizons)):
            raise ConfigError("horizons must be nonempty, strictly increasing")
        if not self.dims:
            raise ConfigError("dims must be nonempty")
        if _feature_kind(self.feature_kind) is None:
            raise ConfigError(f"unknown feature kind {self.feature_kind!r}")
        if self.estimator not in ("one_step", "plugin_ols"):
            raise ConfigError(f"unknown estimator {self.estimator!r}")
        if self.stabilizer not in ("none", "linucb", "oracle"):
            raise ConfigError(f"unknown stabilizer {self.stabilizer!r}")
        # resolve every rule up front so bad configs fail before execution
        for T in self.horizons:
            for d in self.dims:
                env = build_environment(self, d)
                resolve_policy(self, T, d)
                build_target(self, env.beta0)
                resolve_lambda(self.lambda_h, T, d, allow_auto=True)
                resolve_lambda(self.lambda_alpha, T, d, allow_auto=False)


_FEATURE_ALIASES = {"tabular": KIND_TABULAR,
                    "context_arm": KIND_CONTEXT_ARM,
                    "unit_sphere": KIND_UNIT_SPHERE}


def _feature_kind(name: str):
    name = name.strip()
    if name in (KIND_TABULAR, KIND_CONTEXT_ARM, KIND_UNIT_SPHERE):
        return name
    return _FEATURE_ALIASES.get(name)


def build_environment(config: ExperimentConfig, d: int) -> Environment:
    kind = _feature_kind(config.feature_kind)
    if kind == KIND_TABULAR:
        fm = tabular_arms(d)
    elif kind == KIND_UNIT_SPHERE:
        fm = unit_sphere_arms(d, config.n_arms)
    else:
        if d % config.n_arms:
            raise ConfigError("dim must be a multiple of n_arms for "
                              "context_arm_basis")
        fm = context_arm_basis(d // config.n_arms, config.n_arms)
    if config.beta0_kind == "e1":
        beta0 = np.zeros(d)
        beta0[0] = config.beta0_scale
    elif config.beta0_kind == "ones":
        beta0 = np.full(d, config.beta0_scale / math.sqrt(d))
    elif config.beta0_kind == "fixed":
        beta0 = np.asarray(config.beta0_fixed, dtype=np.float64)
        if beta0.shape != (d,):
            raise ConfigError("beta0_fixed length does not match dim")
    else:
        raise ConfigError(f"unknown beta0 kind {config.beta0_kind!r}")
    return Environment(feature_map=fm, beta0=beta0, sigma=config.sigma,
                       noise_kind=config.noise_kind)


def resolve_policy(config: ExperimentConfig, T: int, d: int):
    text = config.policy.strip()
    if text.startswith("linucb_auto"):
        c = 1.0
        if "(" in text:
            inner = text[text.index("(") + 1:-1]
            for part in inner.split(","):
                if part:
                    k, _, v = part.partition("=")
                    if k.strip() == "c":
                        c = float(v)
        gamma = exploration_schedule(T, d, config.sigma, c)
        return LinUCBPolicy(gamma=gamma)
    return parse_policy(text)


def build_target(config: ExperimentConfig, beta0: np.ndarray) -> TargetSpec:
    d = beta0.shape[0]
    if config.target_rule == "aligned":
        nrm = np.linalg.norm(beta0)
        if nrm == 0.0:
            raise ConfigError("aligned target needs a nonzero beta0")
        return TargetSpec(nu=beta0 / nrm, label="aligned")
    if config.target_rule == "orthogonal":
        if d < 2:
            raise ConfigError("orthogonal target needs dim >= 2")
        k = int(np.argmin(np.abs(beta0)))
        nu = np.zeros(d)
        nu[k] = 1.0
        nrm = np.linalg.norm(beta0)
        if nrm > 0.0:
            nu -= (nu @ beta0) / nrm**2 * beta0
        nu /= np.linalg.norm(nu)
        return TargetSpec(nu=nu, label="orthogonal")
    if config.target_rule == "fixed":
        nu = np.asarray(config.target_fixed, dtype=np.float64)
        if nu.shape != (d,):
            raise ConfigError("target_fixed length does not match dim")
        return TargetSpec(nu=nu, label="fixed")
    raise ConfigError(f"unknown target rule {config.target_rule!r}")


def resolve_lambda(rule: str, T: int, d: int, allow_auto: bool):
    rule = str(rule).strip()
    if rule == "auto":
        if not allow_auto:
            raise ConfigError("auto is only valid for lambda_h")
        return None
    if rule == "1/T":
        return 1.0 / T
    if rule == "d/T":
        return d / T
    if rule == "1/sqrtT":
        return 1.0 / math.sqrt(T)
    try:
        value = float(rule)
    except ValueError:
        raise ConfigError(f"cannot resolve lambda rule {rule!r}") from None
    if value < 0:
        raise ConfigError("lambda must be nonnegative")
    return value


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _run_replication(args):
    """One (cell, rep) task; returns a flat record dict."""
    (config, cell, T, d, rep, stab_matrix) = args
    env = build_environment(config, d)
    policy = resolve_policy(config, T, d)
    target = build_target(config, env.beta0)
    seed = derive_seed(config.master_seed, cell, rep)
    record = {c: "" for c in RECORD_COLUMNS}
    record.update(cell=cell, rep=rep, seed=seed, T=T, d=d,
                  policy=policy.describe(), target_rule=config.target_rule,
                  truth=float(target.nu @ env.beta0), status="ok")
    try:
        traj = generate_trajectory(env, policy, T, seed)
        lam_h = resolve_lambda(config.lambda_h, T, d, allow_auto=True)
        lam_a = resolve_lambda(config.lambda_alpha, T, d, allow_auto=False)
        if config.estimator == "plugin_ols":
            report = plugin_ols_estimate(traj, target, level=config.level)
        else:
            report = one_step_estimate(traj, target, lambda_h=lam_h,
                                       lambda_alpha=lam_a,
                                       variance_method=config.variance_method,
                                       level=config.level)
        for k in ("psi_hat", "psi_plugin", "correction", "se", "ci_low",
                  "ci_high", "sigma_hat", "lambda_h", "lambda_alpha",
                  "variance_method"):
            record[k] = getattr(report, k)
        if config.stabilizer != "none":
            if config.stabilizer == "linucb":
                gamma = getattr(policy, "gamma", 0.0)
                stab = diag.linucb_target_matrix(env.beta0, T, d, gamma)
            else:
                stab = diag.StabilizerMatrix(
                    matrix=stab_matrix, source=diag.SOURCE_ORACLE_SIGMA_BAR)
            srep = diag.compute_stability_report(
                traj, target, report.lambda_h, report.lambda_alpha, stab,
                env.beta0, config.sigma, lindeberg_eps=config.lindeberg_eps)
            record.update(ds_stat=srep.ds_stat, riesz_dist=srep.riesz_dist,
                          riesz_dist_normalized=srep.riesz_dist_normalized,
                          lindeberg=srep.lindeberg,
                          riesz_err=srep.remainder.riesz_err,
                          outcome_err=srep.remainder.outcome_err,
                          bias_term=srep.remainder.bias_term,
                          r_total=srep.remainder.r_total,
                          threshold=srep.remainder.threshold,
                          sigma_tilde=srep.sigma_tilde)
        if config.anisotropy:
            gamma = getattr(policy, "gamma", 0.0)
            ridge = getattr(policy, "ridge_reg", 1.0)
            arep = diag.eigen_anisotropy_report(traj, env.beta0, gamma, ridge)
            record.update(top_alignment=arep.top_alignment,
                          bulk_ratio_median=arep.bulk_ratio_median,
                          trace_check=arep.trace_check)
    except AdaptiveLabError as exc:
        record["status"] = f"failed:{type(exc).__name__}"
    except np.linalg.LinAlgError:
        record["status"] = "failed:LinAlgError"
    return record


def _iter_tasks(config: ExperimentConfig):
    cell = 0
    for T in config.horizons:
        for d in config.dims:
            stab_matrix = None
            if config.stabilizer == "oracle":
                env = build_environment(config, d)
                policy = resolve_policy(config, T, d)
                stab_matrix = pooled_design_oracle(
                    env, policy, T, config.oracle_n_mc,
                    derive_seed(config.master_seed, 10_000_019 + cell))
            for rep in range(config.replications):
                yield (config, cell, T, d, rep, stab_matrix)
            cell += 1


def run_replications(config: ExperimentConfig, workers: int = 1) -> list[dict]:
    """Run every (cell, rep) task; records sorted by (cell, rep)."""
    config.validate()
    tasks = list(_iter_tasks(config))
    if workers <= 1:
        records = [_run_replication(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunk = max(1, len(tasks) // (8 * workers))
            records = list(pool.map(_run_replication, tasks, chunksize=chunk))
    records.sort(key=lambda r: (r["cell"], r["rep"]))
    return records


def normal_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def kolmogorov_pvalue(x: float) -> float:
    """Asymptotic Kolmogorov tail P(sup |B| > x) = 2 sum (-1)^{k-1} e^{-2k^2x^2}."""
    if x <= 0:
        return 1.0
    total = 0.0
    sign = 1.0
    for k in range(1, 200):
        term = math.exp(-2.0 * k * k * x * x)
        total += sign * term
        sign = -sign
        if term < 1e-12:
            break
    return min(1.0, max(0.0, 2.0 * total))


def ks_normality(values) -> tuple[float, float]:
    """One-sample KS statistic and p-value against the standard normal."""
    values = np.sort(np.asarray(values, dtype=np.float64))
    n = values.size
    if n < 8:
        raise TooFewSamples("KS test needs at least 8 values")
    cdf = np.array([normal_cdf(v) for v in values])
    i = np.arange(1, n + 1)
    stat = float(np.max(np.maximum(i / n - cdf, cdf - (i - 1) / n)))
    return stat, kolmogorov_pvalue(math.sqrt(n) * stat)


@dataclass(frozen=True)
class CoverageRow:
    T: int
    d: int
    policy: str
    target_rule: str
    coverage: float
    mean_ci_width: float
    rmse: float
    bias: float
    ks_stat: float
    ks_pvalue: float
    median_ds_stat: float
    median_riesz_dist_norm: float
    median_remainder_ratio: float
    n_failed: int

    def csv_row(self) -> str:
        return ",".join(_fmt(getattr(self, c)) for c in SUMMARY_COLUMNS)


def _median_or_nan(values) -> float:
    return float(np.median(values)) if values else math.nan


def coverage_summary(records: list[dict], truth: float,
                     level: float = 0.95) -> CoverageRow:
    """Reduce one cell's per-replication records to a CoverageRow."""
    ok = [r for r in records if r["status"] == "ok"]
    n_failed = len(records) - len(ok)
    head = records[0]
    if not ok:
        nan = math.nan
        return CoverageRow(T=head["T"], d=head["d"], policy=head["policy"],
                           target_rule=head["target_rule"], coverage=nan,
                           mean_ci_width=nan, rmse=nan, bias=nan, ks_stat=nan,
                           ks_pvalue=nan, median_ds_stat=nan,
                           median_riesz_dist_norm=nan,
                           median_remainder_ratio=nan, n_failed=n_failed)
    covered = [r["ci_low"] <= truth <= r["ci_high"] for r in ok]
    errors = [r["psi_hat"] - truth for r in ok]
    widths = [r["ci_high"] - r["ci_low"] for r in ok]
    zscores = [e / r["se"] for e, r in zip(errors, ok) if r["se"] > 0]
    if len(zscores) >= 8:
        ks_stat, ks_pvalue = ks_normality(zscores)
    else:
        ks_stat, ks_pvalue = math.nan, math.nan
    ds = [r["ds_stat"] for r in ok if r["ds_stat"] != ""]
    rdn = [r["riesz_dist_normalized"] for r in ok
           if r["riesz_dist_normalized"] != ""]
    ratio = [r["r_total"] / r["threshold"] for r in ok
             if r["r_total"] != "" and r["threshold"] not in ("", 0.0)]
    return CoverageRow(
        T=head["T"], d=head["d"], policy=head["policy"],
        target_rule=head["target_rule"],
        coverage=float(np.mean(covered)),
        mean_ci_width=float(np.mean(widths)),
        rmse=float(np.sqrt(np.mean(np.square(errors)))),
        bias=float(np.mean(errors)),
        ks_stat=ks_stat, ks_pvalue=ks_pvalue,
        median_ds_stat=_median_or_nan([abs(v) for v in ds]),
        median_riesz_dist_norm=_median_or_nan(rdn),
        median_remainder_ratio=_median_or_nan(ratio),
        n_failed=n_failed,
    )


def summarize(config: ExperimentConfig, records: list[dict]) -> list[CoverageRow]:
    rows = []
    cells = sorted({r["cell"] for r in records})
    for cell in cells:
        cell_records = [r for r in records if r["cell"] == cell]
        rows.append(coverage_summary(cell_records, cell_records[0]["truth"],
                                     config.level))
    return rows


def write_records_csv(records: list[dict], path) -> None:
    try:
        with open(path, "w") as fh:
            fh.write(",".join(RECORD_COLUMNS) + "\n")
            for r in records:
                fh.write(",".join(_fmt(r[c]) for c in RECORD_COLUMNS) + "\n")
    except OSError as exc:
        raise OutputIOError(str(exc)) from exc


def write_summary(rows: list[CoverageRow], csv_path, json_path) -> None:
    try:
        with open(csv_path, "w") as fh:
            fh.write(",".join(SUMMARY_COLUMNS) + "\n")
            for row in rows:
                fh.write(row.csv_row() + "\n")
        with open(json_path, "w") as fh:
            json.dump([asdict(row) for row in rows], fh, indent=2)
    except OSError as exc:
        raise OutputIOError(str(exc)) from exc


def run_experiment(config: ExperimentConfig, out_dir=None,
                   workers: int = 1) -> list[CoverageRow]:
    """Full grid run; optionally writes records.csv / summary.csv / summary.json."""
    records = run_replications(config, workers=workers)
    rows = summarize(config, records)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_records_csv(records, os.path.join(out_dir, "records.csv"))
        write_summary(rows, os.path.join(out_dir, "summary.csv"),
                      os.path.join(out_dir, "summary.json"))
    return rows


def compare_estimators(config: ExperimentConfig,
                       workers: int = 1) -> list[dict]:
    """Paired one-step vs plug-in OLS on identical trajectories."""
    one = run_replications(replace(config, estimator="one_step"),
                           workers=workers)
    ols = run_replications(replace(config, estimator="plugin_ols"),
                           workers=workers)
    rows = []
    for cell in sorted({r["cell"] for r in one}):
        a = [r for r in one if r["cell"] == cell]
        b = [r for r in ols if r["cell"] == cell]
        truth = a[0]["truth"]
        pairs = [(x, y) for x, y in zip(a, b)
                 if x["status"] == "ok" and y["status"] == "ok"]
        wins = [abs(x["psi_hat"] - truth) < abs(y["psi_hat"] - truth)
                for x, y in pairs]
        row_a = coverage_summary(a, truth, config.level)
        row_b = coverage_summary(b, truth, config.level)
        rows.append({
            "T": a[0]["T"], "d": a[0]["d"], "policy": a[0]["policy"],
            "rmse_one_step": row_a.rmse, "rmse_ols": row_b.rmse,
            "coverage_one_step": row_a.coverage, "coverage_ols": row_b.coverage,
            "n_failed_one_step": row_a.n_failed, "n_failed_ols": row_b.n_failed,
            "n_pairs": len(pairs),
            "frac_one_step_better": (float(np.mean(wins)) if pairs
                                     else math.nan),
        })
    return rows
