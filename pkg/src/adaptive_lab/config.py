"""Flat key=value configuration files with sections.

Schema (section.key = default):

[experiment]
  horizons      = 400        comma-separated strictly increasing horizons T
  dims          = 1          comma-separated feature dimensions d
  replications  = 100        Monte Carlo replications per grid cell
  master_seed   = 0          64-bit master seed
  level         = 0.95       two-sided confidence level

[env]
  feature_kind  = tabular    tabular | context_arm | unit_sphere
  n_arms        = 2          candidate arms per round (tabular uses dims)
  sigma         = 1.0        outcome noise scale
  noise_kind    = gaussian   gaussian | rademacher
  beta0_kind    = e1         e1 | ones | fixed
  beta0_scale   = 1.0        norm of beta0 under e1/ones rules
  beta0_fixed   =            comma-separated floats when beta0_kind=fixed

[policy]
  descriptor    = uniform    uniform | eps_greedy(eps=..) | linucb(gamma=..)
                             | linucb_auto(c=..) (schedule-resolved gamma)

[target]
  rule          = aligned    aligned | orthogonal | fixed
  fixed         =            comma-separated floats when rule=fixed

[estimator]
  kind            = one_step      one_step | plugin_ols
  lambda_h        = auto          auto | 0 | 1/T | d/T | 1/sqrtT | number
  lambda_alpha    = 1/T           0 | 1/T | number
  variance_method = empirical_if  empirical_if | quadratic_form

[diagnostics]
  stabilizer    = none       none | linucb | oracle
  oracle_n_mc   = 500        trajectories for the pooled-matrix oracle
  lindeberg_eps = 0.01       truncation level for the Lindeberg sum
  anisotropy    = false      also compute the eigen-anisotropy report

[lan]
  epsilon       = 1.0        local parameter for the likelihood-ratio path
  oracle_n_mc   = 500        trajectories for the pooled-matrix oracle

[simulate]
  n_trajectories = 1         trajectory files written by the simulate command
"""

from __future__ import annotations

import configparser

from .errors import ConfigError
from .harness import ExperimentConfig

DEFAULTS = {
    "experiment": {"horizons": "400", "dims": "1", "replications": "100",
                   "master_seed": "0", "level": "0.95"},
    "env": {"feature_kind": "tabular", "n_arms": "2", "sigma": "1.0",
            "noise_kind": "gaussian", "beta0_kind": "e1",
            "beta0_scale": "1.0", "beta0_fixed": ""},
    "policy": {"descriptor": "uniform"},
    "target": {"rule": "aligned", "fixed": ""},
    "estimator": {"kind": "one_step", "lambda_h": "auto",
                  "lambda_alpha": "1/T", "variance_method": "empirical_if"},
    "diagnostics": {"stabilizer": "none", "oracle_n_mc": "500",
                    "lindeberg_eps": "0.01", "anisotropy": "false"},
    "lan": {"epsilon": "1.0", "oracle_n_mc": "500"},
    "simulate": {"n_trajectories": "1"},
}


def default_config() -> dict:
    return {sec: dict(keys) for sec, keys in DEFAULTS.items()}


def load_config(path=None) -> dict:
    """Read an INI-style file on top of the defaults; unknown keys fail."""
    cfg = default_config()
    if path is None:
        return cfg
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from exc
    for section in parser.sections():
        if section not in cfg:
            raise ConfigError(f"unknown config section [{section}]")
        for key, value in parser.items(section):
            if key not in cfg[section]:
                raise ConfigError(f"unknown config key {section}.{key}")
            cfg[section][key] = value.strip()
    return cfg


def apply_overrides(cfg: dict, overrides) -> dict:
    """Apply repeatable --set section.key=value pairs in order."""
    for text in overrides:
        head, sep, value = text.partition("=")
        if not sep:
            raise ConfigError(f"override {text!r} is not key=value")
        section, dot, key = head.strip().partition(".")
        if not dot:
            raise ConfigError(f"override key {head!r} is not section.key")
        if section not in cfg or key not in cfg[section]:
            raise ConfigError(f"unknown config key {section}.{key}")
        cfg[section][key] = value.strip()
    return cfg


def dump_config(cfg: dict) -> str:
    """Canonical text form (sorted sections/keys) for manifests."""
    lines = []
    for section in sorted(cfg):
        lines.append(f"[{section}]")
        for key in sorted(cfg[section]):
            lines.append(f"{key} = {cfg[section][key]}")
        lines.append("")
    return "\n".join(lines)


def _int_tuple(text: str, what: str) -> tuple:
    try:
        return tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise ConfigError(f"{what} must be comma-separated integers, "
                          f"got {text!r}") from None


def _float_tuple(text: str) -> tuple:
    return tuple(float(p) for p in text.split(",") if p.strip())


def _get_float(cfg: dict, section: str, key: str) -> float:
    try:
        return float(cfg[section][key])
    except ValueError:
        raise ConfigError(f"{section}.{key} must be a number, "
                          f"got {cfg[section][key]!r}") from None


def _get_int(cfg: dict, section: str, key: str) -> int:
    try:
        return int(cfg[section][key])
    except ValueError:
        raise ConfigError(f"{section}.{key} must be an integer, "
                          f"got {cfg[section][key]!r}") from None


def _get_bool(cfg: dict, section: str, key: str) -> bool:
    value = cfg[section][key].lower()
    if value in ("true", "1", "yes"):
        return True
    if value in ("false", "0", "no"):
        return False
    raise ConfigError(f"{section}.{key} must be a boolean, got {value!r}")


def build_experiment_config(cfg: dict) -> ExperimentConfig:
    ec = ExperimentConfig(
        feature_kind=cfg["env"]["feature_kind"],
        sigma=_get_float(cfg, "env", "sigma"),
        policy=cfg["policy"]["descriptor"],
        horizons=_int_tuple(cfg["experiment"]["horizons"], "horizons"),
        dims=_int_tuple(cfg["experiment"]["dims"], "dims"),
        replications=_get_int(cfg, "experiment", "replications"),
        master_seed=_get_int(cfg, "experiment", "master_seed"),
        n_arms=_get_int(cfg, "env", "n_arms"),
        noise_kind=cfg["env"]["noise_kind"],
        beta0_kind=cfg["env"]["beta0_kind"],
        beta0_scale=_get_float(cfg, "env", "beta0_scale"),
        beta0_fixed=_float_tuple(cfg["env"]["beta0_fixed"]),
        target_rule=cfg["target"]["rule"],
        target_fixed=_float_tuple(cfg["target"]["fixed"]),
        lambda_h=cfg["estimator"]["lambda_h"],
        lambda_alpha=cfg["estimator"]["lambda_alpha"],
        estimator=cfg["estimator"]["kind"],
        variance_method=cfg["estimator"]["variance_method"],
        level=_get_float(cfg, "experiment", "level"),
        stabilizer=cfg["diagnostics"]["stabilizer"],
        oracle_n_mc=_get_int(cfg, "diagnostics", "oracle_n_mc"),
        lindeberg_eps=_get_float(cfg, "diagnostics", "lindeberg_eps"),
        anisotropy=_get_bool(cfg, "diagnostics", "anisotropy"),
    )
    ec.validate()
    return ec
