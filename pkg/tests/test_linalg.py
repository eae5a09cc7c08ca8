import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptive_lab.errors import SingularSystem
from adaptive_lab.linalg import (check_symmetric, effective_dimension,
                                 pseudo_inverse_apply, quadratic_form,
                                 ridge_solve, sym_eigendecomposition)

from oracles import gauss_solve


def random_spd(rng, d, scale=1.0):
    a = rng.standard_normal((d, d))
    return scale * (a @ a.T / d + 0.1 * np.eye(d))


def test_check_symmetric_rejects_asymmetric():
    with pytest.raises(ValueError):
        check_symmetric(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        check_symmetric(np.zeros(3))


def test_check_symmetric_accepts_roundoff():
    s = np.array([[1.0, 0.5 + 1e-15], [0.5, 2.0]])
    out = check_symmetric(s)
    assert np.array_equal(out, out.T)


def test_eigendecomposition_matches_numpy():
    rng = np.random.default_rng(0)
    for d in (1, 2, 3, 5, 17, 64):
        s = random_spd(rng, d)
        eig = sym_eigendecomposition(s)
        ref = np.sort(np.linalg.eigvalsh(s))[::-1]
        assert np.allclose(eig.values, ref, atol=1e-10)
        # descending order, orthonormal vectors, exact reconstruction
        assert np.all(np.diff(eig.values) <= 1e-12)
        assert np.allclose(eig.vectors.T @ eig.vectors, np.eye(d), atol=1e-10)
        assert np.allclose(eig.reconstruct(), s, atol=1e-10)


def test_eigendecomposition_orthogonal_similarity_invariance():
    rng = np.random.default_rng(1)
    s = random_spd(rng, 6)
    q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    rotated = q @ s @ q.T
    v1 = sym_eigendecomposition(s).values
    v2 = sym_eigendecomposition(0.5 * (rotated + rotated.T)).values
    assert np.allclose(v1, v2, atol=1e-10)


def test_ridge_solve_matches_elimination_oracle():
    rng = np.random.default_rng(2)
    for d in (1, 3, 8):
        s = random_spd(rng, d)
        b = rng.standard_normal(d)
        for lam in (0.0, 1e-3, 1.0):
            x = ridge_solve(s, b, lam)
            ref = gauss_solve(s + lam * np.eye(d), b)
            assert np.allclose(x, ref, atol=1e-9)


def test_ridge_solve_zero_lambda_singular():
    s = np.array([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(SingularSystem):
        ridge_solve(s, np.array([1.0, 0.0]), 0.0)
    # positive lambda always works
    out = ridge_solve(s, np.array([1.0, 0.0]), 0.5)
    assert np.all(np.isfinite(out))


def test_ridge_solve_negative_lambda_rejected():
    with pytest.raises(ValueError):
        ridge_solve(np.eye(2), np.ones(2), -1e-3)


def test_pseudo_inverse_penrose_identities():
    rng = np.random.default_rng(3)
    # rank-deficient PSD: 5x5 of rank 3
    x = rng.standard_normal((3, 5))
    s = x.T @ x
    p = np.column_stack([pseudo_inverse_apply(s, e) for e in np.eye(5)])
    assert np.allclose(s @ p @ s, s, atol=1e-9)
    assert np.allclose(p @ s @ p, p, atol=1e-9)
    assert np.allclose((s @ p).T, s @ p, atol=1e-9)
    assert np.allclose((p @ s).T, p @ s, atol=1e-9)


def test_pseudo_inverse_zero_matrix():
    assert np.array_equal(pseudo_inverse_apply(np.zeros((3, 3)), np.ones(3)),
                          np.zeros(3))


def test_effective_dimension_formula_and_monotonicity():
    rng = np.random.default_rng(4)
    s = random_spd(rng, 6)
    lams = [1e-4, 1e-2, 1.0, 100.0]
    vals = [effective_dimension(s, lam) for lam in lams]
    for lam, v in zip(lams, vals):
        direct = np.trace(np.linalg.solve(s + lam * np.eye(6), s))
        assert v == pytest.approx(direct, abs=1e-9)
    assert vals == sorted(vals, reverse=True)  # decreasing in lambda
    assert 0.0 < vals[-1] < vals[0] < 6.0
    with pytest.raises(ValueError):
        effective_dimension(s, 0.0)


def test_quadratic_form():
    s = np.array([[2.0, 1.0], [1.0, 3.0]])
    v = np.array([1.0, -1.0])
    assert quadratic_form(s, v) == pytest.approx(3.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=1, max_value=12),
       st.integers(min_value=0, max_value=2**32 - 1),
       st.floats(min_value=1e-8, max_value=10.0))
def test_ridge_solve_residual_property(d, seed, lam):
    rng = np.random.default_rng(seed)
    s = random_spd(rng, d)
    b = rng.standard_normal(d)
    x = ridge_solve(s, b, lam)
    assert np.allclose((s + lam * np.eye(d)) @ x, b,
                       atol=1e-8 * max(1.0, np.linalg.norm(b)))


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=1, max_value=10),
       st.integers(min_value=0, max_value=2**32 - 1))
def test_eigendecomposition_property(d, seed):
    rng = np.random.default_rng(seed)
    s = random_spd(rng, d, scale=float(rng.uniform(0.1, 50.0)))
    eig = sym_eigendecomposition(s)
    assert np.allclose(eig.reconstruct(), s,
                       atol=1e-9 * max(1.0, np.linalg.norm(s)))
