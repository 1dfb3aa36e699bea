from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tiebreak import (
    DesignProblem,
    SingularInformation,
    augment_rows,
    criterion_gradient,
    expected_information,
    neg_log_det,
    realized_information,
)
from tiebreak.model import InformationMatrix, block_identity_terms, objective_and_gradient


def _problem(seed, n, d):
    r = np.random.default_rng(seed)
    return DesignProblem(r.normal(size=(n, d)), r.normal(size=d))


def test_problem_validation():
    with pytest.raises(ValueError):
        DesignProblem(np.array([[np.nan]]))
    with pytest.raises(ValueError):
        DesignProblem(np.zeros((0, 2)))
    pr = DesignProblem(np.ones((3, 2)), np.zeros(2))
    with pytest.raises(ValueError):
        pr.running()
    assert not pr.X.flags.writeable


@pytest.mark.parametrize("x, plus, minus", [
    ([2.0], [1, 2, 1, 2], [1, 2, -1, -2]),
    ([0.0, 0.0], [1, 0, 0, 1, 0, 0], [1, 0, 0, -1, 0, 0]),
    ([-1.0, 3.0], [1, -1, 3, 1, -1, 3], [1, -1, 3, -1, 1, -3]),
])
def test_augment_rows_examples(x, plus, minus):
    rows = augment_rows(DesignProblem(np.array([x])))
    np.testing.assert_array_equal(rows.plus[0], plus)
    np.testing.assert_array_equal(rows.minus[0], minus)


def test_expected_information_single_row_at_half():
    c = 1.7
    M = expected_information(DesignProblem(np.array([[c]])), [0.5]).matrix
    blk = np.array([[1, c], [c, c * c]])
    np.testing.assert_allclose(M, np.block([[blk, 0 * blk], [0 * blk, blk]]), atol=1e-15)


def test_expected_information_all_treated():
    pr = _problem(1, 5, 2)
    up, _ = augment_rows(pr)
    np.testing.assert_allclose(expected_information(pr, np.ones(5)).matrix, up.T @ up, atol=1e-12)


def test_expected_information_summation_oracle(rng):
    pr = _problem(2, 6, 2)
    p = rng.uniform(size=6)
    up, um = augment_rows(pr)
    oracle = np.zeros((6, 6))
    for i in range(6):
        oracle += p[i] * np.outer(up[i], up[i]) + (1 - p[i]) * np.outer(um[i], um[i])
    M = expected_information(pr, p)
    np.testing.assert_allclose(M.matrix, oracle, rtol=1e-12, atol=1e-12)
    np.testing.assert_array_equal(M.A, pr.Xtilde.T @ pr.Xtilde)
    per = expected_information(pr, p, scale="per-observation")
    np.testing.assert_allclose(per.matrix * 6, M.matrix, rtol=1e-14)


def test_expected_information_dimension_mismatch():
    with pytest.raises(ValueError):
        expected_information(_problem(0, 4, 2), np.full(3, 0.5))


def test_realized_information_blocks():
    pr = _problem(3, 7, 3)
    z = np.array([1, -1, 1, 1, -1, -1, 1])
    M = realized_information(pr, z)
    np.testing.assert_allclose(M.A, M.matrix[4:, 4:], rtol=1e-13)
    Mp = realized_information(pr, np.ones(7))
    np.testing.assert_allclose(Mp.B, pr.Xtilde.T @ pr.Xtilde, rtol=1e-13)
    with pytest.raises(ValueError):
        realized_information(pr, np.array([1, 0, 1, 1, -1, -1, 1]))


def test_block_identity_small_instance():
    r = np.random.default_rng(4)
    pr = DesignProblem(r.normal(size=(4, 1)))
    U = np.hstack([pr.Xtilde, pr.Xtilde * np.array([1, -1, 1, -1])[:, None]])
    G = U.T @ U
    lhs = np.linalg.det(G)
    rhs = np.linalg.det(pr.Xtilde.T @ pr.Xtilde) / np.linalg.det(np.linalg.inv(G)[2:, 2:])
    assert lhs == pytest.approx(rhs, rel=1e-8)
    a, b, c = block_identity_terms(pr, [1, -1, 1, -1])
    assert a + b == pytest.approx(c, rel=1e-9, abs=1e-9)


def test_information_matrix_rejects_asymmetric_and_indefinite():
    with pytest.raises(ValueError):
        InformationMatrix(np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        InformationMatrix(np.diag([1.0, -1.0]))


def test_neg_log_det_examples():
    assert neg_log_det(np.eye(4)) == 0.0
    assert neg_log_det(2 * np.eye(4)) == pytest.approx(-4 * math.log(2), rel=1e-15)
    with pytest.raises(SingularInformation):
        neg_log_det(np.diag([1.0, 1.0, 1e-20, 1.0]))


def test_neg_log_det_simulation_eigen_oracle():
    from tiebreak.gaussian import GaussianPopulation
    from tiebreak.io import SIM_ETA, SIM_SIGMA

    X = GaussianPopulation(SIM_SIGMA, SIM_ETA).sample(500, seed=1)
    M = expected_information(DesignProblem(X), np.full(500, 0.5))
    import mpmath

    mpmath.mp.dps = 40
    ev = mpmath.eigsy(mpmath.matrix(M.matrix.tolist()), eigvals_only=True)
    oracle = -float(sum(mpmath.log(v) for v in ev))
    assert neg_log_det(M) == pytest.approx(oracle, rel=1e-8)


def test_gradient_symmetric_instance():
    pr = DesignProblem(np.array([[-1.0], [1.0]]))
    g = criterion_gradient(pr, [0.5, 0.5])
    assert g[0] == pytest.approx(-g[1], abs=1e-12)
    np.testing.assert_allclose(g, 0.0, atol=1e-12)


def test_gradient_zero_at_half_for_symmetric_multiset():
    r = np.random.default_rng(5)
    X = r.normal(size=(6, 2))
    pr = DesignProblem(np.vstack([X, -X]))
    np.testing.assert_allclose(criterion_gradient(pr, np.full(12, 0.5)), 0.0, atol=1e-12)


def _fd_gradient(pr, p, h=1e-5):
    g = np.empty(p.size)
    for i in range(p.size):
        e = np.zeros(p.size)
        e[i] = h
        g[i] = (neg_log_det(expected_information(pr, p + e)) - neg_log_det(expected_information(pr, p - e))) / (2 * h)
    return g


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(6, 20), d=st.integers(1, 4))
def test_gradient_matches_finite_differences(seed, n, d):
    if n < 2 * (d + 1):
        n = 2 * (d + 1)
    pr = _problem(seed, n, d)
    p = np.random.default_rng(seed + 1).uniform(0.05, 0.95, n)
    np.testing.assert_allclose(criterion_gradient(pr, p), _fd_gradient(pr, p), atol=1e-4)


def test_objective_and_gradient_criteria():
    pr = _problem(6, 12, 2)
    p = np.full(12, 0.3)
    f, g = objective_and_gradient(pr.Xtilde, p)
    assert f == pytest.approx(neg_log_det(expected_information(pr, p)), rel=1e-12)
    np.testing.assert_allclose(g, criterion_gradient(pr, p), rtol=1e-10, atol=1e-12)
    fa, ga = objective_and_gradient(pr.Xtilde, p, criterion="A")
    M = expected_information(pr, p).matrix
    assert fa == pytest.approx(np.trace(np.linalg.inv(M)), rel=1e-10)
    h = 1e-6
    e = np.zeros(12)
    e[0] = h
    fd = (objective_and_gradient(pr.Xtilde, p + e, criterion="A")[0]
          - objective_and_gradient(pr.Xtilde, p - e, criterion="A")[0]) / (2 * h)
    assert ga[0] == pytest.approx(fd, rel=1e-5, abs=1e-7)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6), alpha=st.floats(0.0, 1.0))
def test_expected_information_affine(seed, alpha):
    r = np.random.default_rng(seed)
    pr = _problem(seed, 8, 2)
    p, q = r.uniform(size=8), r.uniform(size=8)
    lhs = expected_information(pr, alpha * p + (1 - alpha) * q).matrix
    rhs = alpha * expected_information(pr, p).matrix + (1 - alpha) * expected_information(pr, q).matrix
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-11)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6), alpha=st.floats(0.01, 0.99))
def test_criterion_convex(seed, alpha):
    r = np.random.default_rng(seed)
    pr = _problem(seed, 10, 2)
    p, q = r.uniform(0.05, 0.95, 10), r.uniform(0.05, 0.95, 10)

    def f(v):
        return neg_log_det(expected_information(pr, v))

    assert f(alpha * p + (1 - alpha) * q) <= alpha * f(p) + (1 - alpha) * f(q) + 1e-9


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(4, 30), d=st.integers(1, 4))
def test_block_identity_property(seed, n, d):
    r = np.random.default_rng(seed)
    pr = DesignProblem(r.normal(size=(n, d)))
    z = r.choice([-1, 1], size=n)
    try:
        a, b, c = block_identity_terms(pr, z)
    except SingularInformation:
        return
    assert math.exp(a + b - c) == pytest.approx(1.0, rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_rct_zero_off_diagonal(seed):
    pr = _problem(seed, 9, 3)
    assert np.all(expected_information(pr, np.full(9, 0.5)).B == 0.0)
