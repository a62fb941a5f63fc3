import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maist.linalg import (Definiteness, LinalgError, definiteness, discretize, eigen_structure,
                          expm)


def taylor_expm(a, t, terms=50):
    a = np.asarray(a, dtype=float) * t
    out = np.eye(len(a))
    term = np.eye(len(a))
    for i in range(1, terms):
        term = term @ a / i
        out = out + term
    return out


def simpson_integral(a, t, panels=10_000):
    """Composite Simpson rule for the integral of exp(A s) over [0, t]."""
    a = np.asarray(a, dtype=float)
    s = np.linspace(0.0, t, panels + 1)
    # exp(A s_i) by stepping with the exact one-panel propagator
    step = taylor_expm(a, t / panels)
    vals = np.empty((panels + 1, *a.shape))
    vals[0] = np.eye(len(a))
    for i in range(1, panels + 1):
        vals[i] = vals[i - 1] @ step
    w = np.ones(panels + 1)
    w[1:-1:2] = 4
    w[2:-1:2] = 2
    return (t / panels / 3) * np.tensordot(w, vals, axes=1)


PLANT_A = [[0.0, 1.0], [-2.0, 3.0]]
PLANT_B = [[0.0], [1.0]]
PLANT_K = [[0.0, -5.0]]


def test_expm_zero_time_is_identity():
    a = np.array([[1.0, -4.0, 2.0], [0.5, 0.0, 3.0], [7.0, 1.0, -2.0]])
    assert np.array_equal(expm(a, 0.0), np.eye(3))


def test_expm_diagonal():
    got = expm(np.diag([-1.5, 0.7]), 2.0)
    assert np.allclose(got, np.diag([math.exp(-3.0), math.exp(1.4)]), rtol=1e-14, atol=0)


def test_expm_plant_matches_series():
    ref = taylor_expm(PLANT_A, 0.05)
    assert np.max(np.abs(expm(PLANT_A, 0.05) - ref)) <= 1e-12


def test_expm_large_norm_matches_series_on_pieces():
    a = np.array([[-3.0, 8.0], [-5.0, 1.0]])
    ref = np.linalg.matrix_power(taylor_expm(a, 0.1), 20)
    got = expm(a, 2.0)
    assert np.allclose(got, ref, rtol=1e-11, atol=1e-14)


def test_expm_rejects_bad_input():
    with pytest.raises(LinalgError):
        expm(np.ones((2, 3)), 1.0)
    with pytest.raises(LinalgError):
        expm([[np.nan, 0.0], [0.0, 1.0]], 1.0)
    with pytest.raises(LinalgError):
        expm(np.eye(2), -1.0)


def stable_matrices(n):
    return st.lists(st.floats(-2, 2, allow_nan=False), min_size=n * n, max_size=n * n).map(
        lambda v: np.array(v).reshape(n, n) - 3.0 * np.eye(n))


@settings(max_examples=60, deadline=None)
@given(st.one_of(stable_matrices(2), stable_matrices(3)),
       st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_expm_semigroup(a, t1, t2):
    lhs = expm(a, t1) @ expm(a, t2)
    assert np.max(np.abs(lhs - expm(a, t1 + t2))) <= 1e-9


def test_discretize_zero_dynamics():
    z = np.zeros((2, 2))
    assert np.allclose(discretize(z, z, z, 0.1, 3), np.eye(2))


def test_discretize_integrates_identity():
    z, i = np.zeros((2, 2)), np.eye(2)
    assert np.allclose(discretize(z, i, i, 0.25, 2), 1.5 * i, atol=1e-15)


def test_discretize_plant_matches_quadrature():
    a, b, k = (np.array(v) for v in (PLANT_A, PLANT_B, PLANT_K))
    ref = taylor_expm(a, 0.05) + simpson_integral(a, 0.05) @ b @ k
    assert np.max(np.abs(discretize(a, b, k, 0.05, 1) - ref)) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(stable_matrices(2), st.integers(1, 20))
def test_discretize_closed_form_when_invertible(a, k):
    b = np.array([[0.3], [1.0]])
    kg = np.array([[-1.0, 0.5]])
    if abs(np.linalg.det(a)) < 1e-2:
        return
    e = expm(a, 0.05 * k)
    closed = e + np.linalg.solve(a, e - np.eye(2)) @ b @ kg
    assert np.max(np.abs(discretize(a, b, kg, 0.05, k) - closed)) <= 1e-9


def test_discretize_singular_a():
    # double integrator: A is nilpotent
    a = np.array([[0.0, 1.0], [0.0, 0.0]])
    b = np.array([[0.0], [1.0]])
    kg = np.array([[-1.0, -2.0]])
    t = 0.3
    integral = np.array([[t, t * t / 2], [0.0, t]])
    ref = np.array([[1.0, t], [0.0, 1.0]]) + integral @ b @ kg
    assert np.allclose(discretize(a, b, kg, 0.1, 3), ref, atol=1e-14)


def test_discretize_dimension_mismatch():
    with pytest.raises(LinalgError):
        discretize(np.eye(2), np.ones((3, 1)), np.ones((1, 2)), 0.1, 1)
    with pytest.raises(LinalgError):
        discretize(np.eye(2), np.ones((2, 1)), np.ones((1, 2)), 0.1, 0)


def test_eigen_structure_diagonal():
    es = eigen_structure(np.diag([1.0, 2.0]))
    assert not es.repeated
    assert len(es.subspaces) == 2
    dirs = sorted(tuple(np.round(np.abs(v[:, 0]), 12)) for v in es.subspaces)
    assert dirs == [(0.0, 1.0), (1.0, 0.0)]


def test_eigen_structure_rotation_pair():
    alpha = 0.4
    es = eigen_structure(alpha * np.array([[1.0, 2.0], [-2.0, 1.0]]))
    assert sorted(es.eigenvalues, key=lambda z: z.imag) == pytest.approx(
        [alpha * (1 - 2j), alpha * (1 + 2j)])
    assert len(es.subspaces) == 1
    assert es.subspaces[0].shape == (2, 2)
    assert np.linalg.matrix_rank(es.subspaces[0]) == 2


def test_eigen_structure_jordan_block_is_repeated():
    assert eigen_structure(np.array([[2.0, 1.0], [0.0, 2.0]])).repeated


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 5), st.integers(0, 10_000))
def test_eigen_structure_invariance_residual(n, seed):
    m = np.random.default_rng(seed).standard_normal((n, n))
    es = eigen_structure(m)
    n_real = int(np.sum(np.abs(es.eigenvalues.imag) <= 1e-12 * max(1, np.abs(es.eigenvalues).max())))
    assert len(es.subspaces) == n_real + (n - n_real) // 2
    for v in es.subspaces:
        coeff = np.linalg.pinv(v) @ m @ v
        assert np.linalg.norm(m @ v - v @ coeff) <= 1e-8 * max(1.0, np.linalg.norm(m))


@pytest.mark.parametrize("s, expected", [
    (np.eye(2), Definiteness.POS_DEF),
    ([[0.0, 1.0], [1.0, 0.0]], Definiteness.INDEFINITE),
    ([[1.0, 0.0], [0.0, 0.0]], Definiteness.POS_SEMI_DEF),
    (-np.eye(3), Definiteness.NEG_DEF),
    ([[-1.0, 0.0], [0.0, 0.0]], Definiteness.NEG_SEMI_DEF),
])
def test_definiteness_examples(s, expected):
    assert definiteness(s) is expected


def test_definiteness_rejects_non_square():
    with pytest.raises(LinalgError):
        definiteness(np.ones((2, 3)))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(0, 10_000))
def test_definiteness_agrees_with_random_vectors(n, seed):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, n))
    s = g + g.T
    if rng.random() < 0.5:
        s = g @ g.T * rng.choice([-1.0, 1.0])
    tol = 1e-9
    cls = definiteness(s, tol)
    x = rng.standard_normal((10_000, n))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    q = np.einsum("ij,jk,ik->i", x, s, x)
    if cls is Definiteness.POS_DEF:
        assert q.min() > 0
    elif cls is Definiteness.POS_SEMI_DEF:
        assert q.min() > -tol * 10
    elif cls is Definiteness.NEG_DEF:
        assert q.max() < 0
    elif cls is Definiteness.NEG_SEMI_DEF:
        assert q.max() < tol * 10
