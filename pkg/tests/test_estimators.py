import math

import numpy as np
import pytest

from adaptive_lab.env import Environment, Trajectory, generate_trajectory
from adaptive_lab.errors import DegenerateDof, SingularSystem
from adaptive_lab.estimators import (CSV_COLUMNS, EstimateReport, TargetSpec,
                                     choose_lambda_h, estimate_noise_variance,
                                     fit_outcome_ridge, fit_riesz_ridge,
                                     one_step_estimate, plugin_ols_estimate)
from adaptive_lab.features import tabular_arms, unit_sphere_arms
from adaptive_lab.policies import UniformPolicy
from adaptive_lab.rng import derive_seed

from oracles import one_step_scalar


def constant_feature_trajectory(outcomes):
    """d=1 trajectory with phi == 1 and the given outcomes."""
    y = np.asarray(outcomes, dtype=np.float64)
    T = y.size
    return Trajectory(horizon=T, dim=1, seed=0, env_hash="h", policy_hash="p",
                      features=np.ones((T, 1)), actions=np.zeros(T, np.int64),
                      outcomes=y, propensities=np.ones(T))


def test_target_spec_rejects_zero():
    with pytest.raises(ValueError):
        TargetSpec(nu=np.zeros(2))


def test_hand_case_double_ridge():
    # T=2, Y=(0,2), lambda_h=lambda_alpha=1: betahat=0.5, alpha=0.5,
    # correction = 0.5 * mean(Y - 0.5) = 0.25, psi = 0.75
    traj = constant_feature_trajectory([0.0, 2.0])
    report = one_step_estimate(traj, TargetSpec(nu=np.array([1.0])),
                               lambda_h=1.0, lambda_alpha=1.0)
    assert report.psi_plugin == pytest.approx(0.5, abs=1e-12)
    assert report.correction == pytest.approx(0.25, abs=1e-12)
    assert report.psi_hat == pytest.approx(0.75, abs=1e-12)


def test_scalar_closed_form_random_lambdas():
    rng = np.random.default_rng(0)
    y = rng.standard_normal(20)
    traj = constant_feature_trajectory(y)
    for lam_h, lam_a in ((0.5, 0.1), (2.0, 0.0), (0.01, 1.0)):
        report = one_step_estimate(traj, TargetSpec(nu=np.array([1.0])),
                                   lambda_h=lam_h, lambda_alpha=lam_a)
        assert report.psi_hat == pytest.approx(
            one_step_scalar(y, lam_h, lam_a), abs=1e-12)


def test_one_step_at_zero_lambda_is_sample_mean():
    rng = np.random.default_rng(1)
    y = 1.0 + rng.standard_normal(100)
    traj = constant_feature_trajectory(y)
    report = one_step_estimate(traj, TargetSpec(nu=np.array([1.0])),
                               lambda_h=0.0, lambda_alpha=0.0)
    assert abs(report.psi_hat - np.mean(y)) <= 1e-10
    assert abs(report.correction) <= 1e-10


def test_one_step_equals_plugin_ols_at_zero_lambda():
    env = Environment(feature_map=unit_sphere_arms(3, 4),
                      beta0=np.array([1.0, -0.5, 0.2]), sigma=0.5)
    traj = generate_trajectory(env, UniformPolicy(), 500, 3)
    target = TargetSpec(nu=np.array([1.0, 1.0, 0.0]))
    a = one_step_estimate(traj, target, lambda_h=0.0, lambda_alpha=0.0,
                          variance_method="quadratic_form")
    b = plugin_ols_estimate(traj, target)
    assert a.psi_hat == pytest.approx(b.psi_hat, abs=1e-10)
    assert a.se == pytest.approx(b.se, rel=1e-9)


def test_scale_equivariance_in_nu():
    env = Environment(feature_map=unit_sphere_arms(3, 4),
                      beta0=np.array([0.5, 0.5, 0.0]), sigma=0.7)
    traj = generate_trajectory(env, UniformPolicy(), 300, 5)
    nu = np.array([1.0, -2.0, 0.5])
    a = one_step_estimate(traj, TargetSpec(nu=nu))
    b = one_step_estimate(traj, TargetSpec(nu=3.0 * nu))
    assert b.psi_hat == pytest.approx(3.0 * a.psi_hat, rel=1e-10)
    assert b.correction == pytest.approx(3.0 * a.correction, rel=1e-10)
    assert b.se == pytest.approx(3.0 * a.se, rel=1e-10)


def test_outcome_scaling_equivariance():
    traj = constant_feature_trajectory(np.linspace(-1, 2, 30))
    scaled = constant_feature_trajectory(4.0 * np.linspace(-1, 2, 30))
    t = TargetSpec(nu=np.array([1.0]))
    a = one_step_estimate(traj, t, lambda_h=0.3, lambda_alpha=0.1)
    b = one_step_estimate(scaled, t, lambda_h=0.3, lambda_alpha=0.1)
    assert b.psi_hat == pytest.approx(4.0 * a.psi_hat, rel=1e-10)
    assert b.sigma_hat == pytest.approx(4.0 * a.sigma_hat, rel=1e-10)


def test_choose_lambda_h_grid_membership_and_noiseless_choice():
    env = Environment(feature_map=unit_sphere_arms(4, 3),
                      beta0=np.array([1.0, 0.0, 0.0, 0.0]), sigma=0.0)
    traj = generate_trajectory(env, UniformPolicy(), 400, 7)
    lam = choose_lambda_h(traj)
    T, d = 400, 4
    grid = {1.0 / T, d / T, 1.0 / math.sqrt(T)}
    assert lam in grid
    # no noise: least shrinkage generalizes best
    assert lam == min(grid)


def test_noise_variance_matches_sample_variance():
    rng = np.random.default_rng(11)
    y = rng.standard_normal(50)
    traj = constant_feature_trajectory(y)
    fit = fit_outcome_ridge(traj, 0.0)
    assert estimate_noise_variance(traj, fit) == pytest.approx(
        np.var(y, ddof=1), rel=1e-10)


def test_noise_variance_degenerate_dof():
    traj = constant_feature_trajectory([1.0])
    fit = fit_outcome_ridge(traj, 0.0)
    with pytest.raises(DegenerateDof):
        estimate_noise_variance(traj, fit)


def test_riesz_fit_identity():
    env = Environment(feature_map=tabular_arms(3),
                      beta0=np.zeros(3), sigma=1.0)
    traj = generate_trajectory(env, UniformPolicy(), 600, 13)
    nu = np.array([1.0, 0.0, -1.0])
    fit = fit_riesz_ridge(traj, TargetSpec(nu=nu), 0.01)
    # (Sigma + lam) w = nu
    from adaptive_lab.env import empirical_gram
    gram = empirical_gram(traj)
    assert np.allclose((gram + 0.01 * np.eye(3)) @ fit.weight_vector, nu,
                       atol=1e-10)
    assert fit.empirical_sq_norm == pytest.approx(
        float(fit.weight_vector @ gram @ fit.weight_vector))


def test_plugin_ols_singular_raises():
    # two arms never pulled -> rank-deficient empirical Gram
    traj = Trajectory(horizon=5, dim=3, seed=0, env_hash="h", policy_hash="p",
                      features=np.tile(np.eye(3)[0], (5, 1)),
                      actions=np.zeros(5, np.int64),
                      outcomes=np.ones(5), propensities=np.ones(5))
    with pytest.raises(SingularSystem):
        plugin_ols_estimate(traj, TargetSpec(nu=np.array([1.0, 0, 0])))


def test_report_serialization():
    traj = constant_feature_trajectory(np.arange(10.0))
    report = one_step_estimate(traj, TargetSpec(nu=np.array([1.0])),
                               lambda_h=0.1, lambda_alpha=0.05)
    row = report.csv_row(seed=7, T=10, d=1, policy="uniform")
    parts = row.split(",")
    assert len(parts) == len(CSV_COLUMNS)
    assert parts[0] == "7" and parts[3] == "uniform"
    assert float(parts[CSV_COLUMNS.index("psi_hat")]) == report.psi_hat
    import json
    blob = json.loads(report.to_json())
    assert blob["psi_hat"] == report.psi_hat
    assert blob["variance_method"] == report.variance_method


def test_report_invariants_enforced():
    with pytest.raises(AssertionError):
        EstimateReport(psi_hat=1.0, psi_plugin=0.5, correction=0.1, se=0.1,
                       ci_low=0.8, ci_high=1.2, sigma_hat=1.0, lambda_h=0.0,
                       lambda_alpha=0.0, variance_method="empirical_if")


def test_confidence_level_monotone_width():
    traj = constant_feature_trajectory(np.random.default_rng(17).normal(size=40))
    t = TargetSpec(nu=np.array([1.0]))
    w = [one_step_estimate(traj, t, lambda_h=0.0, lambda_alpha=0.0,
                           level=lvl) for lvl in (0.8, 0.9, 0.95, 0.99)]
    widths = [r.ci_high - r.ci_low for r in w]
    assert widths == sorted(widths)


def test_default_lambda_alpha_is_one_over_T():
    env = Environment(feature_map=tabular_arms(2),
                      beta0=np.array([1.0, 0.0]), sigma=0.5)
    traj = generate_trajectory(env, UniformPolicy(), 250, derive_seed(1))
    report = one_step_estimate(traj, TargetSpec(nu=np.array([1.0, 0.0])))
    assert report.lambda_alpha == pytest.approx(1.0 / 250)
