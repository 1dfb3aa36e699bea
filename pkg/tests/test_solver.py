from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tiebreak import (
    ConstraintSet,
    DesignProblem,
    Infeasible,
    SingularInformation,
    SolverConfig,
    TooLarge,
    brute_force_optimum,
    check_feasibility,
    expected_information,
    neg_log_det,
    solve,
)
from tiebreak.projection import FeasibleSet


def random_problem(seed, n, d):
    r = np.random.default_rng(seed)
    return DesignProblem(r.normal(size=(n, d)), r.normal(size=d))


def random_feasible_points(problem, c, k, seed):
    fs = FeasibleSet(problem.n, c, problem.running())
    r = np.random.default_rng(seed)
    out = []
    while len(out) < k:
        p = fs.project(r.uniform(size=problem.n))
        if fs.is_feasible(p):
            out.append(p)
    return out


@pytest.mark.parametrize("seed, n, d", [(0, 50, 2), (1, 200, 5), (2, 30, 3)])
def test_unconstrained_is_rct(seed, n, d):
    pr = random_problem(seed, n, d)
    rep = solve(pr)
    assert rep.converged
    np.testing.assert_allclose(rep.p_opt, 0.5, atol=1e-4)
    assert rep.objective == pytest.approx(neg_log_det(expected_information(pr, np.full(n, 0.5))), rel=1e-10)


def test_full_gain_forces_rdd(backend):
    pr = random_problem(3, 40, 2)
    s = pr.running()
    rep = solve(pr, ConstraintSet(gain_fraction=1.0), backend=backend)
    np.testing.assert_array_equal(rep.p_opt, (s > 0).astype(float))


def test_three_point_budget_against_grid():
    pr = DesignProblem(np.array([[-1.0], [0.2], [1.0]]))
    c = ConstraintSet(budget=1 / 3)
    rep = solve(pr, c)
    pg, fg = brute_force_optimum(pr, c, grid_step=0.01)
    np.testing.assert_allclose(rep.p_opt, pg, atol=1e-2)
    assert rep.objective == pytest.approx(fg, abs=1e-4)
    assert rep.objective <= fg + 1e-12


def test_grid_oracle_examples():
    pr = DesignProblem(np.array([[-1.0], [1.0]]), np.array([1.0]))
    pg, _ = brute_force_optimum(pr, grid_step=0.05)
    np.testing.assert_allclose(pg, [0.5, 0.5], atol=1e-12)
    pr3 = DesignProblem(np.array([[-1.0, 0.3], [0.4, 1.0], [2.0, -0.5], [-0.7, -1.2]]), np.array([1.0, 0.5]))
    pg, _ = brute_force_optimum(pr3, ConstraintSet(gain_fraction=1.0), grid_step=0.1)
    np.testing.assert_array_equal(pg, (pr3.running() > 0).astype(float))
    with pytest.raises(TooLarge):
        brute_force_optimum(random_problem(0, 5, 1))


@pytest.mark.parametrize("seed", range(4))
def test_solver_beats_grid_with_budget(seed):
    pr = random_problem(10 + seed, 3, 1)
    c = ConstraintSet(budget=0.4)
    rep = solve(pr, c)
    _, fg = brute_force_optimum(pr, c, grid_step=0.02)
    assert fg >= rep.objective - 1e-3
    assert fg - rep.objective <= 0.5  # grid within a coarse Lipschitz band


def test_check_feasibility_examples():
    pr = random_problem(4, 30, 2)
    rep = check_feasibility(pr, ConstraintSet(budget=0.5, gain_fraction=0.0))
    assert rep.feasible and rep.witness is not None
    s = np.linspace(-1, 1, 41)
    sym = DesignProblem(s[:, None], np.array([1.0]))
    rep = check_feasibility(sym, ConstraintSet(budget=0.01, gain_fraction=0.99))
    assert not rep.feasible and rep.witness is None and "infeasible" in rep.certificate
    with pytest.raises(Infeasible) as exc:
        solve(sym, ConstraintSet(budget=0.01, gain_fraction=0.99))
    assert exc.value.certificate == rep.certificate
    rep = check_feasibility(pr, ConstraintSet())
    np.testing.assert_array_equal(rep.witness, 0.5)
    rep = check_feasibility(pr, ConstraintSet(budget=0.2, monotone=True))
    np.testing.assert_array_equal(rep.witness, 0.2)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), mu=st.floats(0.05, 0.95), rho=st.floats(-1, 1), mono=st.booleans())
def test_witness_is_feasible(seed, mu, rho, mono):
    pr = random_problem(seed, 25, 2)
    c = ConstraintSet(budget=mu, monotone=mono, gain_fraction=rho)
    rep = check_feasibility(pr, c)
    if rep.feasible:
        assert FeasibleSet(pr.n, c, pr.running()).is_feasible(rep.witness)


def test_singular_design_raises():
    with pytest.raises(SingularInformation):
        solve(DesignProblem(np.array([[1.0, 2.0]])))
    with pytest.raises(SingularInformation):
        solve(DesignProblem(np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0], [4.0, 8.0]])))


def test_iteration_cap_reports_unconverged():
    pr = random_problem(5, 100, 3)
    rep = solve(pr, ConstraintSet(budget=0.3), SolverConfig(max_iter=2))
    assert not rep.converged and rep.iterations == 2
    assert np.isfinite(rep.objective)


@pytest.mark.parametrize("c", [
    ConstraintSet(budget=0.3),
    ConstraintSet(gain_fraction=0.5),
    ConstraintSet(budget=0.3, gain_fraction=0.5),
    ConstraintSet(budget=0.3, monotone=True),
    ConstraintSet(budget=0.3, monotone=True, gain_fraction=0.5),
], ids=lambda c: str(c.describe()))
def test_constrained_solve_properties(backend, c):
    pr = random_problem(6, 120, 3)
    rep = solve(pr, c, backend=backend)
    assert rep.converged
    assert all(np.diff(rep.history) <= 1e-12)
    fs = FeasibleSet(pr.n, c, pr.running())
    assert fs.is_feasible(rep.p_opt)
    s = pr.running()
    if c.budget is not None:
        assert abs(rep.p_opt.mean() - c.budget) < 1e-8
        assert "budget" in rep.active_constraints
    if c.gain_fraction is not None:
        assert (2 * rep.p_opt - 1) @ s >= c.gain_fraction * np.abs(s).sum() - 1e-8 * np.abs(s).sum()
    if c.monotone:
        ps = rep.p_opt[np.argsort(s, kind="stable")]
        assert np.max(ps[:-1] - ps[1:]) < 1e-8
        free = solve(pr, ConstraintSet(budget=c.budget, gain_fraction=c.gain_fraction))
        assert rep.levels() <= free.levels()
    for p0 in random_feasible_points(pr, c, 2, seed=1):
        again = solve(pr, c, initial=p0, backend=backend)
        assert again.objective == pytest.approx(rep.objective, abs=1e-6)


def test_ties_share_probability():
    r = np.random.default_rng(8)
    X = np.round(r.normal(size=(80, 2)), 1)
    pr = DesignProblem(X, np.array([1.0, 0.0]))
    rep = solve(pr, ConstraintSet(budget=0.4, monotone=True))
    s = pr.running()
    for v in np.unique(s):
        assert np.ptp(rep.p_opt[s == v]) == 0


cp = pytest.importorskip("cvxpy")


def logdet_oracle(pr, c):
    up = np.hstack([pr.Xtilde, pr.Xtilde])
    um = np.hstack([pr.Xtilde, -pr.Xtilde])
    k = up.shape[1]
    M0 = um.T @ um
    D = np.einsum("ij,ik->jki", up, up) - np.einsum("ij,ik->jki", um, um)
    p = cp.Variable(pr.n)
    M = M0 + cp.reshape(D.reshape(k * k, pr.n) @ p, (k, k), order="C")
    cons = [p >= 0, p <= 1]
    s = pr.running()
    if c.budget is not None:
        cons.append(cp.sum(p) == pr.n * c.budget)
    if c.gain_fraction is not None:
        cons.append((2 * p - 1) @ s >= c.gain_fraction * np.abs(s).sum())
    if c.monotone:
        ps = p[np.argsort(s, kind="stable")]
        cons.append(ps[1:] >= ps[:-1])
    prob = cp.Problem(cp.Minimize(-cp.log_det((M + M.T) / 2)), cons)
    prob.solve(solver=cp.CLARABEL)
    return prob.value


@pytest.mark.parametrize("c", [
    ConstraintSet(budget=0.3),
    ConstraintSet(budget=0.3, gain_fraction=0.5),
    ConstraintSet(budget=0.3, monotone=True, gain_fraction=0.5),
], ids=lambda c: str(c.describe()))
def test_matches_conic_solver(c):
    pr = random_problem(9, 40, 2)
    rep = solve(pr, c)
    assert rep.objective == pytest.approx(logdet_oracle(pr, c), abs=1e-5)


def test_unconstrained_optimum_set_is_flat():
    # any p with X~^T diag(2p - 1) X~ = 0 attains the RCT value
    pr = random_problem(12, 60, 2)
    ref = solve(pr).objective
    rep = solve(pr, initial=np.random.default_rng(0).uniform(0.05, 0.95, 60))
    assert rep.objective == pytest.approx(ref, abs=1e-9)
    B = expected_information(pr, rep.p_opt).B
    assert np.max(np.abs(B)) < 1e-3
