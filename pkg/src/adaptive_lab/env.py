"""Data-generating environment and trajectory simulation."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import _kernels
from .errors import InvalidSpec
from .features import FeatureMap, sample_candidates_batch
from .policies import Policy
from .rng import derive_seed, make_generator

NOISE_GAUSSIAN = "gaussian"
NOISE_RADEMACHER = "rademacher"


@dataclass(frozen=True)
class Environment:
    """Linear-mean outcome model: E[Y | Z=z] = phi(z)' beta0, noise scale sigma."""

    feature_map: FeatureMap
    beta0: np.ndarray
    sigma: float
    noise_kind: str = NOISE_GAUSSIAN

    def __post_init__(self):
        beta0 = np.asarray(self.beta0, dtype=np.float64)
        if beta0.shape != (self.feature_map.dim,):
            raise InvalidSpec("beta0 dimension does not match the feature map")
        if self.sigma < 0:
            raise InvalidSpec("sigma must be nonnegative")
        if self.noise_kind not in (NOISE_GAUSSIAN, NOISE_RADEMACHER):
            raise InvalidSpec(f"unknown noise kind {self.noise_kind!r}")
        object.__setattr__(self, "beta0", beta0)

    def describe(self) -> str:
        b = ",".join(f"{v:.17g}" for v in self.beta0)
        return (f"env({self.feature_map.describe()},beta0=[{b}],"
                f"sigma={self.sigma:.17g},noise={self.noise_kind})")


@dataclass(frozen=True)
class Observation:
    round: int
    action_index: int
    feature: np.ndarray
    outcome: float
    propensity: float


@dataclass(frozen=True)
class Trajectory:
    """One run of an environment+policy pair, stored column-wise."""

    horizon: int
    dim: int
    seed: int
    env_hash: str
    policy_hash: str
    features: np.ndarray      # (T, d)
    actions: np.ndarray       # (T,)
    outcomes: np.ndarray      # (T,)
    propensities: np.ndarray  # (T,)
    env_descriptor: str = ""
    policy_descriptor: str = ""

    def observations(self) -> Iterator[Observation]:
        for t in range(self.horizon):
            yield Observation(round=t + 1,
                              action_index=int(self.actions[t]),
                              feature=self.features[t],
                              outcome=float(self.outcomes[t]),
                              propensity=float(self.propensities[t]))


def _hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _draw_noise(env: Environment, T: int, rng: np.random.Generator) -> np.ndarray:
    if env.noise_kind == NOISE_GAUSSIAN:
        return env.sigma * rng.standard_normal(T)
    signs = 2.0 * (rng.random(T) < 0.5) - 1.0
    return env.sigma * signs


def sample_outcome(env: Environment, feature: np.ndarray,
                   rng: np.random.Generator) -> float:
    feature = np.asarray(feature, dtype=np.float64)
    return float(feature @ env.beta0 + _draw_noise(env, 1, rng)[0])


def generate_trajectory(env: Environment, policy: Policy, T: int,
                        seed: int) -> Trajectory:
    """Simulate T rounds; bit-exact under a fixed seed.

    All randomness (candidate sets, noise, policy randomization) is drawn
    up front in a fixed order, so the stream consumed does not depend on
    the policy's decisions.
    """
    if T < 1:
        raise InvalidSpec("T must be at least 1")
    fm = env.feature_map
    rng = make_generator(seed)
    candidates = sample_candidates_batch(fm, T, rng)
    noise = _draw_noise(env, T, rng)
    unif = rng.random(T)
    rand_arm = rng.integers(0, fm.n_arms, size=T)

    actions = np.zeros(T, dtype=np.int64)
    propensities = np.zeros(T)
    outcomes = np.zeros(T)
    features = np.zeros((T, fm.dim))
    eps = getattr(policy, "eps", 0.0)
    gamma = getattr(policy, "gamma", 0.0)
    ridge = getattr(policy, "ridge_reg", 1.0)
    _kernels.simulate_rounds(policy.kind_id, eps, gamma, ridge,
                             candidates, env.beta0, noise, unif, rand_arm,
                             actions, propensities, outcomes, features)
    return Trajectory(horizon=T, dim=fm.dim, seed=seed,
                      env_hash=_hash(env.describe()),
                      policy_hash=_hash(policy.describe()),
                      features=features, actions=actions, outcomes=outcomes,
                      propensities=propensities,
                      env_descriptor=env.describe(),
                      policy_descriptor=policy.describe())


def empirical_gram(traj: Trajectory) -> np.ndarray:
    """Sigma_hat = (1/T) sum_t phi_t phi_t'."""
    g = traj.features.T @ traj.features / traj.horizon
    return 0.5 * (g + g.T)


def empirical_cross_moment(traj: Trajectory) -> np.ndarray:
    """Sigma_hat_{ZY} = (1/T) sum_t phi_t Y_t."""
    return traj.features.T @ traj.outcomes / traj.horizon


def pooled_design_oracle(env: Environment, policy: Policy, T: int,
                         n_mc: int, seed: int) -> np.ndarray:
    """Monte Carlo estimate of the pooled matrix Sigma_bar over n_mc runs."""
    if n_mc < 1:
        raise InvalidSpec("n_mc must be at least 1")
    acc = np.zeros((env.feature_map.dim, env.feature_map.dim))
    for i in range(n_mc):
        acc += empirical_gram(generate_trajectory(env, policy, T,
                                                  derive_seed(seed, i)))
    return acc / n_mc


def save_trajectory(traj: Trajectory, path) -> None:
    """Line-oriented text format.

    Header: ``T,d,env_hash,policy_hash,seed``; then one line per round:
    ``t,action_index,feature_0,...,feature_{d-1},outcome,propensity`` with
    floats printed to 17 significant digits.
    """
    with open(path, "w") as fh:
        fh.write(f"{traj.horizon},{traj.dim},{traj.env_hash},"
                 f"{traj.policy_hash},{traj.seed}\n")
        for t in range(traj.horizon):
            feats = ",".join(f"{v:.17g}" for v in traj.features[t])
            fh.write(f"{t + 1},{traj.actions[t]},{feats},"
                     f"{traj.outcomes[t]:.17g},{traj.propensities[t]:.17g}\n")


def load_trajectory(path) -> Trajectory:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        T, d = int(header[0]), int(header[1])
        env_hash, policy_hash, seed = header[2], header[3], int(header[4])
        features = np.zeros((T, d))
        actions = np.zeros(T, dtype=np.int64)
        outcomes = np.zeros(T)
        propensities = np.zeros(T)
        for t in range(T):
            parts = fh.readline().strip().split(",")
            if int(parts[0]) != t + 1:
                raise InvalidSpec(f"round indices out of order at line {t + 2}")
            actions[t] = int(parts[1])
            features[t] = [float(v) for v in parts[2:2 + d]]
            outcomes[t] = float(parts[2 + d])
            propensities[t] = float(parts[3 + d])
    return Trajectory(horizon=T, dim=d, seed=seed, env_hash=env_hash,
                      policy_hash=policy_hash, features=features,
                      actions=actions, outcomes=outcomes,
                      propensities=propensities)
