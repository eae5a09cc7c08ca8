"""Nuisance fits, the one-step estimator, and the OLS plug-in baseline."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .env import Trajectory, empirical_cross_moment, empirical_gram
from .errors import DegenerateDof
from .linalg import effective_dimension, ridge_solve, sym_eigendecomposition

VARIANCE_QUADRATIC_FORM = "quadratic_form"
VARIANCE_EMPIRICAL_IF = "empirical_if"

CSV_COLUMNS = ("seed", "T", "d", "policy", "lambda_h", "lambda_alpha",
               "psi_hat", "psi_plugin", "correction", "se", "ci_low",
               "ci_high", "sigma_hat", "variance_method")


@dataclass(frozen=True)
class TargetSpec:
    """Scalar linear functional nu' beta."""

    nu: np.ndarray
    label: str = ""

    def __post_init__(self):
        nu = np.asarray(self.nu, dtype=np.float64)
        if np.linalg.norm(nu) == 0.0:
            raise ValueError("target direction must be nonzero")
        object.__setattr__(self, "nu", nu)


@dataclass(frozen=True)
class RidgeFit:
    beta_hat: np.ndarray
    lambda_h: float
    gram: np.ndarray
    in_sample_mse: float

    def predict(self, features: np.ndarray) -> np.ndarray:
        return features @ self.beta_hat


@dataclass(frozen=True)
class RieszFit:
    """alpha_hat(z) = weight_vector' phi(z)."""

    weight_vector: np.ndarray
    lambda_alpha: float
    empirical_sq_norm: float

    def evaluate(self, features: np.ndarray) -> np.ndarray:
        return features @ self.weight_vector


@dataclass(frozen=True)
class EstimateReport:
    psi_hat: float
    psi_plugin: float
    correction: float
    se: float
    ci_low: float
    ci_high: float
    sigma_hat: float
    lambda_h: float
    lambda_alpha: float
    variance_method: str

    def __post_init__(self):
        assert self.psi_hat == self.psi_plugin + self.correction
        assert self.ci_low <= self.psi_hat <= self.ci_high

    def to_json(self) -> str:
        return json.dumps({k: getattr(self, k) for k in (
            "psi_hat", "psi_plugin", "correction", "se", "ci_low", "ci_high",
            "sigma_hat", "lambda_h", "lambda_alpha", "variance_method")})

    def csv_row(self, seed: int, T: int, d: int, policy: str) -> str:
        vals = {"seed": str(seed), "T": str(T), "d": str(d), "policy": policy,
                "variance_method": self.variance_method}
        for k in ("lambda_h", "lambda_alpha", "psi_hat", "psi_plugin",
                  "correction", "se", "ci_low", "ci_high", "sigma_hat"):
            vals[k] = f"{getattr(self, k):.17g}"
        return ",".join(vals[c] for c in CSV_COLUMNS)


def fit_outcome_ridge(traj: Trajectory, lambda_h: float) -> RidgeFit:
    gram = empirical_gram(traj)
    szy = empirical_cross_moment(traj)
    beta = ridge_solve(gram, szy, lambda_h)
    resid = traj.outcomes - traj.features @ beta
    return RidgeFit(beta_hat=beta, lambda_h=lambda_h, gram=gram,
                    in_sample_mse=float(np.mean(resid**2)))


def _subtrajectory(traj: Trajectory, start: int, stop: int) -> Trajectory:
    sl = slice(start, stop)
    return Trajectory(horizon=stop - start, dim=traj.dim, seed=traj.seed,
                      env_hash=traj.env_hash, policy_hash=traj.policy_hash,
                      features=traj.features[sl], actions=traj.actions[sl],
                      outcomes=traj.outcomes[sl],
                      propensities=traj.propensities[sl])


def choose_lambda_h(traj: Trajectory) -> float:
    """Causal holdout: fit on the first half, score on the remainder."""
    T, d = traj.horizon, traj.dim
    grid = sorted({1.0 / T, d / T, 1.0 / math.sqrt(T)})
    half = max(1, T // 2)
    train = _subtrajectory(traj, 0, half)
    hold_x = traj.features[half:]
    hold_y = traj.outcomes[half:]
    if hold_x.shape[0] == 0:
        return grid[0]
    best_lam, best_err = grid[0], math.inf
    for lam in grid:
        beta = ridge_solve(empirical_gram(train),
                           empirical_cross_moment(train), lam)
        err = float(np.mean((hold_y - hold_x @ beta) ** 2))
        if err < best_err:
            best_lam, best_err = lam, err
    return best_lam


def fit_riesz_ridge(traj: Trajectory, target: TargetSpec,
                    lambda_alpha: float) -> RieszFit:
    gram = empirical_gram(traj)
    w = ridge_solve(gram, target.nu, lambda_alpha)
    return RieszFit(weight_vector=w, lambda_alpha=lambda_alpha,
                    empirical_sq_norm=float(w @ gram @ w))


def estimate_noise_variance(traj: Trajectory, fit: RidgeFit) -> float:
    """sigma_hat^2 with effective-dimension degrees-of-freedom correction."""
    T = traj.horizon
    if fit.lambda_h > 0:
        dof = T - effective_dimension(fit.gram, fit.lambda_h)
    else:
        values = sym_eigendecomposition(fit.gram).values
        rank = int(np.sum(values > 1e-10 * max(values[0], 1e-300)))
        dof = T - rank
    if dof <= 0:
        raise DegenerateDof(f"nonpositive residual dof {dof:.3g}")
    resid = traj.outcomes - fit.predict(traj.features)
    return max(float(np.sum(resid**2) / dof), 1e-12)


def standard_error(traj: Trajectory, riesz: RieszFit, outcome_fit: RidgeFit,
                   sigma_hat: float, method: str) -> float:
    T = traj.horizon
    if method == VARIANCE_QUADRATIC_FORM:
        return sigma_hat * math.sqrt(max(riesz.empirical_sq_norm, 0.0) / T)
    if method == VARIANCE_EMPIRICAL_IF:
        alpha_vals = riesz.evaluate(traj.features)
        resid = traj.outcomes - outcome_fit.predict(traj.features)
        return math.sqrt(float(np.sum((alpha_vals * resid) ** 2)) / T**2)
    raise ValueError(f"unknown variance method {method!r}")


def _make_report(traj, target, outcome_fit, riesz, variance_method, level):
    nu = target.nu
    psi_plugin = float(nu @ outcome_fit.beta_hat)
    resid = traj.outcomes - outcome_fit.predict(traj.features)
    correction = float(np.mean(riesz.evaluate(traj.features) * resid))
    psi_hat = psi_plugin + correction
    sigma_hat = math.sqrt(estimate_noise_variance(traj, outcome_fit))
    se = standard_error(traj, riesz, outcome_fit, sigma_hat, variance_method)
    z = float(norm.ppf(0.5 + level / 2.0))
    return EstimateReport(psi_hat=psi_hat, psi_plugin=psi_plugin,
                          correction=correction, se=se,
                          ci_low=psi_hat - z * se, ci_high=psi_hat + z * se,
                          sigma_hat=sigma_hat,
                          lambda_h=outcome_fit.lambda_h,
                          lambda_alpha=riesz.lambda_alpha,
                          variance_method=variance_method)


def one_step_estimate(traj: Trajectory, target: TargetSpec,
                      lambda_h: float | None = None,
                      lambda_alpha: float | None = None,
                      variance_method: str = VARIANCE_EMPIRICAL_IF,
                      level: float = 0.95) -> EstimateReport:
    """Plug-in nu' beta_hat plus the estimated-influence correction term."""
    if lambda_alpha is None:
        lambda_alpha = 1.0 / traj.horizon
    if lambda_h is None:
        lambda_h = choose_lambda_h(traj)
    outcome_fit = fit_outcome_ridge(traj, lambda_h)
    riesz = fit_riesz_ridge(traj, target, lambda_alpha)
    return _make_report(traj, target, outcome_fit, riesz, variance_method,
                        level)


def plugin_ols_estimate(traj: Trajectory, target: TargetSpec,
                        level: float = 0.95) -> EstimateReport:
    """Unregularized plug-in nu' Sigma_hat^-1 Sigma_hat_{ZY}.

    Raises SingularSystem when the empirical Gram is rank-deficient.
    """
    outcome_fit = fit_outcome_ridge(traj, 0.0)
    riesz = fit_riesz_ridge(traj, target, 0.0)
    return _make_report(traj, target, outcome_fit, riesz,
                        VARIANCE_QUADRATIC_FORM, level)
