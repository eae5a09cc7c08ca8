"""Computable statistics for the stability and regularity conditions.

Everything here is simulation-side: the true coefficient vector and noise
scale are inputs, so each theoretical condition becomes a number that can be
tracked across horizons.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .env import Trajectory, empirical_gram
from .errors import IdentificationFailure, NotUnitNorm, ZeroSignal
from .estimators import RidgeFit, TargetSpec, fit_outcome_ridge
from .linalg import (pseudo_inverse_apply, quadratic_form, ridge_solve,
                     sym_eigendecomposition)

SOURCE_LINUCB_FORMULA = "linucb_formula"
SOURCE_ORACLE_SIGMA_BAR = "oracle_sigma_bar"
SOURCE_USER = "user_supplied"

STABILITY_CSV_COLUMNS = ("seed", "T", "d", "policy", "gamma", "ds_stat",
                         "riesz_dist", "riesz_dist_normalized", "lindeberg",
                         "riesz_err", "outcome_err", "cross_term", "bias_term",
                         "r_total", "threshold", "sigma_tilde", "sigma_bar_mc")


@dataclass(frozen=True)
class StabilizerMatrix:
    """Deterministic positive definite stabilizer for the design sequence."""

    matrix: np.ndarray
    source: str

    def __post_init__(self):
        values = sym_eigendecomposition(self.matrix).values
        if values[-1] <= 0:
            raise ValueError("stabilizer matrix must be positive definite")

    def inv_apply(self, v: np.ndarray) -> np.ndarray:
        return ridge_solve(self.matrix, v, 0.0)


@dataclass(frozen=True)
class RemainderBreakdown:
    riesz_err: float
    outcome_err: float
    cross_term: float
    bias_term: float
    r_total: float
    threshold: float


@dataclass(frozen=True)
class AnisotropyReport:
    top_alignment: float
    bulk_ratio_min: float
    bulk_ratio_median: float
    bulk_ratio_max: float
    trace_check: float


@dataclass(frozen=True)
class StabilityReport:
    ds_stat: float
    riesz_dist: float
    riesz_dist_normalized: float
    lindeberg: float
    remainder: RemainderBreakdown
    sigma_tilde: float
    sigma_bar_mc: float | None = None

    def to_json(self) -> str:
        d = {"ds_stat": self.ds_stat, "riesz_dist": self.riesz_dist,
             "riesz_dist_normalized": self.riesz_dist_normalized,
             "lindeberg": self.lindeberg, "sigma_tilde": self.sigma_tilde,
             "sigma_bar_mc": self.sigma_bar_mc,
             "remainder": self.remainder.__dict__}
        return json.dumps(d)

    def csv_row(self, seed: int, T: int, d: int, policy: str,
                gamma: float) -> str:
        rb = self.remainder
        vals = [str(seed), str(T), str(d), policy, f"{gamma:.17g}"]
        for x in (self.ds_stat, self.riesz_dist, self.riesz_dist_normalized,
                  self.lindeberg, rb.riesz_err, rb.outcome_err, rb.cross_term,
                  rb.bias_term, rb.r_total, rb.threshold, self.sigma_tilde):
            vals.append(f"{x:.17g}")
        vals.append("" if self.sigma_bar_mc is None
                    else f"{self.sigma_bar_mc:.17g}")
        return ",".join(vals)


def signal_projector(beta0: np.ndarray) -> np.ndarray:
    beta0 = np.asarray(beta0, dtype=np.float64)
    nrm2 = float(beta0 @ beta0)
    if nrm2 == 0.0:
        raise ZeroSignal("signal projector undefined for beta0 = 0")
    return np.outer(beta0, beta0) / nrm2


def linucb_target_matrix(beta0: np.ndarray, T: int, d: int, gamma: float,
                         variant: str = "appendix") -> StabilizerMatrix:
    """Rank-one signal projector plus a shrunken bulk.

    The "appendix" variant uses bulk scale gamma / sqrt(T d); the "main"
    variant uses (T d)^(1/4) / sqrt(gamma).  The appendix form is the one
    consistent with the closed-form normalizing scale and is the default.
    """
    if gamma <= 0 or T < 1 or d < 2:
        raise ValueError("need gamma > 0, T >= 1, d >= 2")
    p_star = signal_projector(beta0)
    if p_star.shape != (d, d):
        raise ValueError("beta0 dimension does not match d")
    if variant == "appendix":
        bulk = gamma / math.sqrt(T * d)
    elif variant == "main":
        bulk = (T * d) ** 0.25 / math.sqrt(gamma)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    p_perp = np.eye(d) - p_star
    return StabilizerMatrix(matrix=p_star + bulk * p_perp,
                            source=SOURCE_LINUCB_FORMULA)


def sigma_tilde(target: TargetSpec, stab: StabilizerMatrix,
                sigma: float) -> float:
    """sigma * sqrt(nu' Sigma_tilde^-1 nu)."""
    return sigma * math.sqrt(float(target.nu @ stab.inv_apply(target.nu)))


def sigma_bar(target: TargetSpec, sigma_bar_gram: np.ndarray,
              sigma: float) -> float:
    """sigma * sqrt(nu' Sigma_bar^+ nu); fails when nu is not identified."""
    nu = target.nu
    pinv_nu = pseudo_inverse_apply(sigma_bar_gram, nu)
    outside = np.linalg.norm(nu - sigma_bar_gram @ pinv_nu)
    if outside > 1e-6 * np.linalg.norm(nu):
        raise IdentificationFailure(
            f"nu has mass {outside:.3e} outside range(Sigma_bar)")
    return sigma * math.sqrt(max(float(nu @ pinv_nu), 0.0))


def directional_stability_stat(traj: Trajectory, target: TargetSpec,
                               stab: StabilizerMatrix, sigma: float) -> float:
    """(sigma^2 / sigma_tilde^2) * u' (Sigma_hat - Sigma_tilde) u, u = Sigma_tilde^-1 nu."""
    u = stab.inv_apply(target.nu)
    st2 = sigma**2 * float(target.nu @ u)
    diff = empirical_gram(traj) - stab.matrix
    return (sigma**2 / st2) * float(u @ diff @ u)


def lan_stability_stat(traj: Trajectory, target: TargetSpec,
                       sigma_bar_gram: np.ndarray, sigma: float) -> float:
    """Same statistic with the pooled matrix and its pseudoinverse."""
    sb = sigma_bar(target, sigma_bar_gram, sigma)
    u = pseudo_inverse_apply(sigma_bar_gram, target.nu)
    diff = empirical_gram(traj) - sigma_bar_gram
    return (sigma**2 / sb**2) * float(u @ diff @ u)


def riesz_stability_distance(traj: Trajectory, target: TargetSpec,
                             lambda_alpha: float, stab: StabilizerMatrix,
                             normalize: bool = False,
                             sigma: float = 1.0) -> float:
    """|| alpha_hat - alpha_tilde ||_{L2(P_T)}, optionally over sigma_tilde."""
    gram = empirical_gram(traj)
    w_hat = ridge_solve(gram, target.nu, lambda_alpha)
    w_til = stab.inv_apply(target.nu)
    delta = w_hat - w_til
    dist = math.sqrt(max(quadratic_form(gram, delta), 0.0))
    if normalize:
        dist /= sigma_tilde(target, stab, sigma)
    return dist


def outcome_l2_error(traj: Trajectory, fit: RidgeFit,
                     beta0: np.ndarray) -> float:
    """|| h_hat - h ||_{L2(P_T)} = || beta_hat - beta0 ||_{Sigma_hat}."""
    delta = fit.beta_hat - np.asarray(beta0, dtype=np.float64)
    return math.sqrt(max(quadratic_form(empirical_gram(traj), delta), 0.0))


def von_mises_remainder(traj: Trajectory, target: TargetSpec,
                        lambda_h: float, lambda_alpha: float,
                        stab: StabilizerMatrix, beta0: np.ndarray,
                        sigma: float) -> RemainderBreakdown:
    T = traj.horizon
    gram = empirical_gram(traj)
    fit = fit_outcome_ridge(traj, lambda_h)
    riesz_err = riesz_stability_distance(traj, target, lambda_alpha, stab)
    out_err = outcome_l2_error(traj, fit, beta0)
    delta_beta = fit.beta_hat - np.asarray(beta0, dtype=np.float64)
    bias = float(target.nu @ ridge_solve(gram, delta_beta, lambda_alpha)) / T
    cross = riesz_err * out_err
    r_total = riesz_err * (out_err + 1.0 / math.sqrt(T)) + bias
    return RemainderBreakdown(riesz_err=riesz_err, outcome_err=out_err,
                              cross_term=cross, bias_term=bias,
                              r_total=r_total,
                              threshold=sigma_tilde(target, stab, sigma)
                              / math.sqrt(T))


def _norm_cdf(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.vectorize(math.erf)(x / math.sqrt(2.0)))


def truncated_second_moment_fraction(c_over_sigma: np.ndarray) -> np.ndarray:
    """g(c) = E[eps^2 1{|eps| > c}] / sigma^2 for eps ~ N(0, sigma^2)."""
    a = np.asarray(c_over_sigma, dtype=np.float64)
    phi = np.exp(-0.5 * a**2) / math.sqrt(2.0 * math.pi)
    return 2.0 * a * phi + 2.0 * (1.0 - _norm_cdf(a))


def lindeberg_stat(traj: Trajectory, target: TargetSpec,
                   stab: StabilizerMatrix, sigma: float, eps: float) -> float:
    """Analytic Gaussian evaluation of the conditional Lindeberg sum."""
    if sigma == 0.0:
        return 0.0
    T = traj.horizon
    st2 = sigma_tilde(target, stab, sigma) ** 2
    alpha_vals = traj.features @ stab.inv_apply(target.nu)
    nz = alpha_vals != 0.0
    cutoff = np.zeros_like(alpha_vals)
    cutoff[nz] = math.sqrt(eps * T * st2) / np.abs(alpha_vals[nz])
    g = truncated_second_moment_fraction(cutoff / sigma)
    terms = alpha_vals**2 * sigma**2 / (T * st2) * g
    return float(np.sum(terms[nz]))


def epsilon_bulk(T: int, d: int, gamma: float) -> float:
    """Regime-annotation constant for the LinUCB bulk eigenvalue spread."""
    if d < 2:
        raise ValueError("epsilon_bulk needs d >= 2")
    return d * (gamma**8 / T) ** ((d + 1) / (d - 1)) + d**0.25 / math.sqrt(gamma)


def eigen_anisotropy_report(traj: Trajectory, beta0: np.ndarray, gamma: float,
                            ridge_reg: float = 1.0) -> AnisotropyReport:
    """Top-eigenvector alignment and bulk eigenvalue spread of T * Sigma_hat."""
    norms = np.linalg.norm(traj.features, axis=1)
    if np.max(np.abs(norms - 1.0)) > 1e-9:
        raise NotUnitNorm("eigen-anisotropy facts require unit-norm features")
    T, d = traj.horizon, traj.dim
    lam_hat = T * empirical_gram(traj)
    eig = sym_eigendecomposition(lam_hat)
    beta0 = np.asarray(beta0, dtype=np.float64)
    if np.linalg.norm(beta0) == 0.0:
        raise ZeroSignal("beta0 must be nonzero")
    e1 = beta0 / np.linalg.norm(beta0)
    v = eig.vectors[:, 0]
    top_alignment = min(np.linalg.norm(v - e1), np.linalg.norm(v + e1))
    bulk_scale = math.sqrt(2.0 * gamma**2 * T / (d + 1))
    ratios = eig.values[1:] / bulk_scale
    trace_check = abs(float(np.trace(lam_hat + ridge_reg * np.eye(d)))
                      - (T + d * ridge_reg))
    return AnisotropyReport(top_alignment=float(top_alignment),
                            bulk_ratio_min=float(np.min(ratios)),
                            bulk_ratio_median=float(np.median(ratios)),
                            bulk_ratio_max=float(np.max(ratios)),
                            trace_check=trace_check)


def lan_statistic_detailed(traj: Trajectory, target: TargetSpec,
                           sigma_bar_mc: float,
                           alpha_bar_weights: np.ndarray, beta0: np.ndarray,
                           sigma: float, epsilon: float) -> tuple[float, int]:
    """Log-likelihood ratio along the outcome-perturbation path.

    Returns (statistic, number of nonpositive linear factors); the latter is
    zero except on the measure-zero sign-flip set.
    """
    if epsilon == 0.0:
        return 0.0, 0
    T = traj.horizon
    eta = epsilon * math.sqrt(T) / sigma_bar_mc
    resid = traj.outcomes - traj.features @ np.asarray(beta0, dtype=np.float64)
    alpha_vals = traj.features @ np.asarray(alpha_bar_weights, dtype=np.float64)
    factors = 1.0 + (eta / (2.0 * T)) * alpha_vals * resid
    n_nonpos = int(np.sum(factors <= 0.0))
    log_norm = math.log1p(eta**2 * sigma_bar_mc**2 / (4.0 * T**2))
    stat = float(2.0 * np.sum(np.log(np.abs(factors)))) - T * log_norm
    return stat, n_nonpos


def lan_log_likelihood_ratio(traj: Trajectory, target: TargetSpec,
                             sigma_bar_mc: float,
                             alpha_bar_weights: np.ndarray,
                             beta0: np.ndarray, sigma: float,
                             epsilon: float) -> float:
    return lan_statistic_detailed(traj, target, sigma_bar_mc,
                                  alpha_bar_weights, beta0, sigma, epsilon)[0]


def lan_score(traj: Trajectory, alpha_bar_weights: np.ndarray,
              beta0: np.ndarray, sigma_bar_mc: float) -> float:
    """Delta_T = (sqrt(T) / sigma_bar) * mean(alpha_bar(Z_t) * resid_t)."""
    T = traj.horizon
    resid = traj.outcomes - traj.features @ np.asarray(beta0, dtype=np.float64)
    alpha_vals = traj.features @ np.asarray(alpha_bar_weights, dtype=np.float64)
    return math.sqrt(T) / sigma_bar_mc * float(np.mean(alpha_vals * resid))


def compute_stability_report(traj: Trajectory, target: TargetSpec,
                             lambda_h: float, lambda_alpha: float,
                             stab: StabilizerMatrix, beta0: np.ndarray,
                             sigma: float, lindeberg_eps: float = 0.01,
                             sigma_bar_mc: float | None = None
                             ) -> StabilityReport:
    st = sigma_tilde(target, stab, sigma)
    return StabilityReport(
        ds_stat=directional_stability_stat(traj, target, stab, sigma),
        riesz_dist=riesz_stability_distance(traj, target, lambda_alpha, stab),
        riesz_dist_normalized=riesz_stability_distance(
            traj, target, lambda_alpha, stab, normalize=True, sigma=sigma),
        lindeberg=lindeberg_stat(traj, target, stab, sigma, lindeberg_eps),
        remainder=von_mises_remainder(traj, target, lambda_h, lambda_alpha,
                                      stab, beta0, sigma),
        sigma_tilde=st,
        sigma_bar_mc=sigma_bar_mc,
    )
