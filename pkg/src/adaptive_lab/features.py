"""Feature maps and per-round candidate sampling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSpec

KIND_TABULAR = "tabular_arms"
KIND_CONTEXT_ARM = "context_arm_basis"
KIND_UNIT_SPHERE = "unit_sphere_arms"


@dataclass(frozen=True)
class FeatureMap:
    """Map from (context, action) to a feature vector.

    kind selects one of:
      tabular_arms       -- phi(a) = e_a, dim = K
      context_arm_basis  -- context vector embedded in the chosen arm's block
      unit_sphere_arms   -- K fresh unit-norm arm vectors drawn each round
    """

    kind: str
    dim: int
    n_arms: int
    context_dim: int = 0
    context_law: str = "sphere"
    finite_contexts: tuple = field(default=())
    feature_bound: float = 1.0

    def describe(self) -> str:
        if self.kind == KIND_TABULAR:
            return f"{self.kind}(K={self.n_arms})"
        if self.kind == KIND_CONTEXT_ARM:
            return (f"{self.kind}(context_dim={self.context_dim},K={self.n_arms},"
                    f"law={self.context_law})")
        return f"{self.kind}(d={self.dim},K={self.n_arms})"


def tabular_arms(n_arms: int) -> FeatureMap:
    # K = 1 is the constant-feature map phi == 1 used for the classical d=1 case
    if n_arms < 1:
        raise InvalidSpec("tabular_arms needs at least one arm")
    return FeatureMap(kind=KIND_TABULAR, dim=n_arms, n_arms=n_arms)


def context_arm_basis(context_dim: int, n_arms: int,
                      context_law: str = "sphere",
                      finite_contexts=None) -> FeatureMap:
    if context_dim < 1 or n_arms < 2:
        raise InvalidSpec("context_arm_basis needs context_dim >= 1 and K >= 2")
    if context_law == "finite":
        if not finite_contexts:
            raise InvalidSpec("finite context law needs a context list")
        pts = tuple(tuple(float(v) for v in row) for row in finite_contexts)
        if any(len(row) != context_dim for row in pts):
            raise InvalidSpec("finite contexts must have length context_dim")
        bound = max(float(np.linalg.norm(row)) for row in pts)
    elif context_law == "sphere":
        pts = ()
        bound = 1.0
    else:
        raise InvalidSpec(f"unknown context law {context_law!r}")
    return FeatureMap(kind=KIND_CONTEXT_ARM, dim=context_dim * n_arms,
                      n_arms=n_arms, context_dim=context_dim,
                      context_law=context_law, finite_contexts=pts,
                      feature_bound=bound)


def unit_sphere_arms(dim: int, n_arms: int) -> FeatureMap:
    if dim < 1 or n_arms < 1:
        raise InvalidSpec("unit_sphere_arms needs dim >= 1 and K >= 1")
    return FeatureMap(kind=KIND_UNIT_SPHERE, dim=dim, n_arms=n_arms)


def make_feature_map(kind: str, **params) -> FeatureMap:
    if kind == KIND_TABULAR:
        return tabular_arms(**params)
    if kind == KIND_CONTEXT_ARM:
        return context_arm_basis(**params)
    if kind == KIND_UNIT_SPHERE:
        return unit_sphere_arms(**params)
    raise InvalidSpec(f"unknown feature map kind {kind!r}")


def _unit_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return x / norms


def sample_candidates_batch(fm: FeatureMap, T: int,
                            rng: np.random.Generator) -> np.ndarray:
    """Draw the (T, K, dim) candidate feature array for a whole trajectory.

    Rounds are i.i.d.; tabular arms consume no randomness.
    """
    K, d = fm.n_arms, fm.dim
    if fm.kind == KIND_TABULAR:
        return np.broadcast_to(np.eye(d), (T, K, d)).copy()
    if fm.kind == KIND_UNIT_SPHERE:
        return _unit_rows(rng.standard_normal((T, K, d)))
    # context_arm_basis: one context per round, embedded per arm block
    if fm.context_law == "sphere":
        ctx = _unit_rows(rng.standard_normal((T, fm.context_dim)))
    else:
        pts = np.asarray(fm.finite_contexts)
        ctx = pts[rng.integers(0, len(pts), size=T)]
    out = np.zeros((T, K, d))
    for a in range(K):
        out[:, a, a * fm.context_dim:(a + 1) * fm.context_dim] = ctx
    return out


def sample_candidates(fm: FeatureMap, rng: np.random.Generator) -> np.ndarray:
    """Candidate features for a single round, shape (K, dim)."""
    return sample_candidates_batch(fm, 1, rng)[0]
