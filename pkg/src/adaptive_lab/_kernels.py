"""Hot numeric kernels.

Each kernel is written as a plain-Python/numpy loop and compiled with numba
``@njit`` when available.  Setting the environment variable
``ADAPTIVE_LAB_NO_NUMBA=1`` (or any non-empty value other than ``0``) selects
the pure-numpy path; both paths execute the identical statements, so results
are bit-for-bit equal.  ``benchmarks/benchmark_kernels.py`` compares the two.
"""

from __future__ import annotations

import os

import numpy as np

POLICY_UNIFORM = 0
POLICY_EPS_GREEDY = 1
POLICY_LINUCB = 2


def _numba_disabled() -> bool:
    flag = os.environ.get("ADAPTIVE_LAB_NO_NUMBA", "")
    return flag not in ("", "0")


USING_NUMBA = False
if not _numba_disabled():
    try:
        import numba

        USING_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USING_NUMBA = False


def _maybe_njit(fn):
    if USING_NUMBA:
        return numba.njit(cache=True)(fn)
    return fn


def _jacobi_sweeps(a, v, max_sweeps, tol):
    """Cyclic Jacobi rotations on symmetric ``a`` (mutated in place).

    ``v`` accumulates the rotations (must start as identity).  Returns the
    number of completed sweeps; stops once the off-diagonal Frobenius norm
    is at most ``tol``.
    """
    d = a.shape[0]
    sweeps = 0
    while sweeps < max_sweeps:
        off = 0.0
        for p in range(d - 1):
            for q in range(p + 1, d):
                off += 2.0 * a[p, q] * a[p, q]
        if np.sqrt(off) <= tol:
            return sweeps
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                theta = 0.5 * (aqq - app) / apq
                # smaller-magnitude root keeps rotations below 45 degrees
                if theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + np.sqrt(1.0 + theta * theta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                for k in range(d):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(d):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                for k in range(d):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
        sweeps += 1
    return sweeps


def _simulate_rounds(kind, eps, gamma, ridge_reg, candidates, beta0, noise,
                     unif, rand_arm, actions, propensities, outcomes, features):
    """Sequential bandit rollout.

    ``candidates`` has shape (T, K, d); per-round randomness (``noise``,
    ``unif``, ``rand_arm``) is pre-drawn so the stream consumed is
    independent of the policy's decisions.  The policy's Gram inverse is
    maintained by Sherman-Morrison rank-1 updates.
    """
    T, K, d = candidates.shape
    gram_inv = np.eye(d) / ridge_reg
    xty = np.zeros(d)
    tmp = np.zeros(d)
    for t in range(T):
        if kind == POLICY_UNIFORM:
            a = rand_arm[t]
            prop = 1.0 / K
        else:
            # greedy/UCB scores; ties broken by lowest index via strict >
            betahat = gram_inv @ xty
            best = 0
            best_score = -np.inf
            for j in range(K):
                phi = candidates[t, j]
                score = phi @ betahat
                if kind == POLICY_LINUCB:
                    w = phi @ gram_inv @ phi
                    if w < 0.0:
                        w = 0.0
                    score += gamma * np.sqrt(w)
                if score > best_score:
                    best_score = score
                    best = j
            if kind == POLICY_EPS_GREEDY:
                if unif[t] < eps:
                    a = rand_arm[t]
                else:
                    a = best
                prop = eps / K
                if a == best:
                    prop += 1.0 - eps
            else:
                a = best
                prop = 1.0
        phi = candidates[t, a]
        y = phi @ beta0 + noise[t]
        actions[t] = a
        propensities[t] = prop
        outcomes[t] = y
        features[t] = phi
        if kind != POLICY_UNIFORM:
            tmp[:] = gram_inv @ phi
            denom = 1.0 + phi @ tmp
            for i in range(d):
                for j in range(d):
                    gram_inv[i, j] -= tmp[i] * tmp[j] / denom
            xty += phi * y
    return 0


jacobi_sweeps = _maybe_njit(_jacobi_sweeps)
simulate_rounds = _maybe_njit(_simulate_rounds)
