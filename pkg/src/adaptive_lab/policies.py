"""Logging policies as sequential state machines.

The reference implementations here (select_action / update_state) define the
policy semantics; trajectory simulation runs the equivalent compiled kernel
in :mod:`adaptive_lab._kernels`, and the two are cross-checked in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .errors import EmptyCandidates


@dataclass(frozen=True)
class UniformPolicy:
    kind_id: int = _kernels.POLICY_UNIFORM

    def describe(self) -> str:
        return "uniform"


@dataclass(frozen=True)
class EpsilonGreedyPolicy:
    eps: float
    ridge_reg: float = 1.0
    kind_id: int = _kernels.POLICY_EPS_GREEDY

    def describe(self) -> str:
        return f"eps_greedy(eps={self.eps:g},ridge_reg={self.ridge_reg:g})"


@dataclass(frozen=True)
class LinUCBPolicy:
    gamma: float
    ridge_reg: float = 1.0
    kind_id: int = _kernels.POLICY_LINUCB

    def describe(self) -> str:
        return f"linucb(gamma={self.gamma:g},ridge_reg={self.ridge_reg:g})"


Policy = UniformPolicy | EpsilonGreedyPolicy | LinUCBPolicy


def parse_policy(text: str) -> Policy:
    text = text.strip()
    if text == "uniform":
        return UniformPolicy()
    name, _, args = text.partition("(")
    kv = {}
    if args.endswith(")"):
        for part in args[:-1].split(","):
            if part:
                k, _, v = part.partition("=")
                kv[k.strip()] = float(v)
    if name == "eps_greedy":
        return EpsilonGreedyPolicy(eps=kv["eps"], ridge_reg=kv.get("ridge_reg", 1.0))
    if name == "linucb":
        return LinUCBPolicy(gamma=kv["gamma"], ridge_reg=kv.get("ridge_reg", 1.0))
    raise ValueError(f"unknown policy descriptor {text!r}")


@dataclass(frozen=True)
class PolicyState:
    """Sufficient statistics of a linear policy after some rounds."""

    policy: Policy
    gram: np.ndarray
    xty: np.ndarray
    rounds_seen: int

    @property
    def dim(self) -> int:
        return self.gram.shape[0]


def new_state(policy: Policy, dim: int) -> PolicyState:
    ridge = getattr(policy, "ridge_reg", 1.0)
    return PolicyState(policy=policy, gram=ridge * np.eye(dim),
                       xty=np.zeros(dim), rounds_seen=0)


def select_action(state: PolicyState, candidates: np.ndarray,
                  rng: np.random.Generator) -> tuple[int, float]:
    """Pick a candidate index and return (index, propensity)."""
    candidates = np.asarray(candidates, dtype=np.float64)
    if candidates.ndim != 2 or candidates.shape[0] == 0:
        raise EmptyCandidates("need a nonempty (K, d) candidate array")
    K = candidates.shape[0]
    policy = state.policy
    if isinstance(policy, UniformPolicy):
        return int(rng.integers(0, K)), 1.0 / K
    betahat = np.linalg.solve(state.gram, state.xty)
    scores = candidates @ betahat
    if isinstance(policy, LinUCBPolicy):
        gram_inv = np.linalg.inv(state.gram)
        widths = np.einsum("kd,de,ke->k", candidates, gram_inv, candidates)
        scores = scores + policy.gamma * np.sqrt(np.clip(widths, 0.0, None))
        return int(np.argmax(scores)), 1.0
    # epsilon-greedy
    best = int(np.argmax(scores))
    if rng.random() < policy.eps:
        idx = int(rng.integers(0, K))
    else:
        idx = best
    prop = policy.eps / K + (1.0 - policy.eps) * (idx == best)
    return idx, prop


def update_state(state: PolicyState, feature: np.ndarray,
                 outcome: float) -> PolicyState:
    feature = np.asarray(feature, dtype=np.float64)
    return replace(
        state,
        gram=state.gram + np.outer(feature, feature),
        xty=state.xty + feature * outcome,
        rounds_seen=state.rounds_seen + 1,
    )


def exploration_schedule(T: int, d: int, sigma: float, c: float = 1.0) -> float:
    """Large-exploration bonus c * d^2 * (sigma * sqrt(d + loglog T) + 1)."""
    if T < 3:
        raise ValueError("T must be at least 3")
    loglog = math.log(math.log(T))
    return c * d**2 * (sigma * math.sqrt(d + loglog) + 1.0)
