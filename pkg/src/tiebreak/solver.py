"""Constrained minimization of -log det of the expected information.

Projected gradient descent: Barzilai-Borwein trial steps (seeded by a
finite-difference curvature estimate), projection onto the feasible set,
and Armijo backtracking along the resulting feasible direction.  The
problem is convex, so any stationary point is a global optimum.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import Infeasible, SingularInformation, TooLarge
from .model import DesignProblem, augment_rows, objective_and_gradient
from .projection import ConstraintSet, FeasibleSet, average_ties, gain_rhs

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    tol_grad: float = 1e-7
    tol_step: float = 1e-10
    max_iter: int = 5000
    dykstra_max: int = 500
    dykstra_tol: float = 1e-10
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    criterion: str = "D"
    projection: str = "exact"

    def __post_init__(self):
        for name in ("tol_grad", "tol_step", "max_iter", "dykstra_max", "dykstra_tol", "armijo_c"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not (0 < self.armijo_shrink < 1):
            raise ValueError("armijo_shrink must lie in (0, 1)")
        if self.criterion not in ("D", "A"):
            raise ValueError("criterion must be 'D' or 'A'")
        if self.projection not in ("exact", "dykstra"):
            raise ValueError("projection must be 'exact' or 'dykstra'")


@dataclass
class SolverReport:
    p_opt: np.ndarray
    objective: float
    iterations: int
    converged: bool
    active_constraints: list[str]
    kkt_residual: float
    residuals: dict = field(default_factory=dict)
    ridge: float = 0.0
    history: list[float] = field(default_factory=list)
    message: str = ""

    def levels(self, tol: float = 1e-4) -> int:
        return count_levels(self.p_opt, tol)


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    witness: np.ndarray | None
    certificate: str
    max_gain: float = math.nan


def count_levels(p, tol: float = 1e-4) -> int:
    """Number of distinct values in p after merging gaps below ``tol``."""
    v = np.sort(np.asarray(p, dtype=np.float64))
    if v.size == 0:
        return 0
    return int(1 + np.sum(np.diff(v) > tol))


def _greedy_gain(s: np.ndarray, budget: float | None) -> np.ndarray:
    """Probability vector maximizing sum (2p-1) s subject to the box and budget."""
    n = s.size
    if budget is None:
        p = (s > 0).astype(np.float64)
        p[s == 0] = 0.5
        return p
    total = n * budget
    order = np.argsort(-s, kind="stable")
    p_sorted = np.clip(total - np.arange(n), 0.0, 1.0)
    p = np.empty(n)
    p[order] = p_sorted
    # spread the fractional unit over tied scores; gain is unchanged
    return average_ties(p, s)


def check_feasibility(problem: DesignProblem, constraints: ConstraintSet) -> FeasibilityReport:
    """Decide feasibility exactly and return an interior-leaning witness."""
    c = constraints
    base = np.full(problem.n, 0.5 if c.budget is None else c.budget)
    if c.gain_fraction is None:
        what = "budget" if c.budget is not None else "box"
        return FeasibilityReport(True, base, f"constant p = {base[0]:g} satisfies {what}"
                                 + (" and monotonicity" if c.monotone else ""))
    s = problem.running()
    rho = c.gain_fraction
    abs_total = float(np.abs(s).sum())
    target = rho * abs_total
    greedy = _greedy_gain(s, c.budget)
    g_max = float((2 * greedy - 1) @ s)
    g_base = float((2 * base - 1) @ s)
    cert = (f"max achievable gain {g_max:.17g} (greedy over the box"
            + (f" with mean {c.budget:g}" if c.budget is not None else "")
            + f"; monotone in the running variable) vs required {rho:g} * {abs_total:.17g} = {target:.17g}")
    if g_max < target - 1e-12 * max(abs_total, 1.0):
        return FeasibilityReport(False, None, "infeasible: " + cert, g_max)
    if g_base >= target:
        witness = base
    else:
        t = min(1.0, (target - g_base) / (g_max - g_base))
        witness = np.clip(t * greedy + (1 - t) * base, 0.0, 1.0)
    return FeasibilityReport(True, witness, "feasible: " + cert, g_max)


def _active(p: np.ndarray, fs: FeasibleSet, tol: float = 1e-8) -> list[str]:
    c = fs.constraints
    out = []
    if c.budget is not None:
        out.append("budget")
    if c.gain_fraction is not None and fs.s @ p - fs.rhs <= tol * max(fs.abs_total, 1.0):
        out.append("gain")
    if c.monotone:
        ps = p[fs.order]
        gp = fs.group_ptr
        lv = ps[gp[:-1]]
        eq = np.abs(np.diff(lv)) <= tol
        inner = (lv[:-1] > tol) & (lv[:-1] < 1 - tol)
        if np.any(eq & inner):
            out.append("monotone")
    n0 = int(np.sum(p <= tol))
    n1 = int(np.sum(p >= 1 - tol))
    if n0:
        out.append(f"lower_bound[{n0}]")
    if n1:
        out.append(f"upper_bound[{n1}]")
    return out


def solve(problem: DesignProblem, constraints: ConstraintSet | None = None,
          config: SolverConfig | None = None, initial=None,
          backend: str | None = None) -> SolverReport:
    """Minimize -log det E[U^T U] over feasible treatment probabilities.

    Args:
        problem: covariates and (when constraints need it) eta.
        constraints: budget / monotone / gain constraints; none by default.
        config: tolerances and iteration caps.
        initial: optional starting point; projected onto the feasible set.
        backend: kernel backend name, default the active one.

    Raises:
        Infeasible: the constraints admit no probability vector.
        SingularInformation: no usable information matrix near the start.
    """
    constraints = constraints or ConstraintSet()
    config = config or SolverConfig()
    s = problem.running() if constraints.needs_scores else None
    fs = FeasibleSet(problem.n, constraints, s, config.dykstra_tol, config.dykstra_max, backend,
                     config.projection)
    feas = check_feasibility(problem, constraints)
    if not feas.feasible:
        raise Infeasible(feas.certificate, feas.certificate)
    Xt = problem.Xtilde
    # a rank-deficient X~ makes E[U^T U] singular for every p, so a ridge would only hide it
    rank = np.linalg.matrix_rank(Xt)
    if rank < Xt.shape[1]:
        raise SingularInformation(
            f"augmented covariate matrix has rank {rank} < {Xt.shape[1]}; no p gives positive definite information")

    def finish(p, f, it, converged, kkt, hist, ridge, msg):
        if constraints.monotone:
            p = average_ties(p, s)
        p = np.clip(p, 0.0, 1.0)
        try:
            f = objective_and_gradient(Xt, p, ridge, config.criterion)[0]
        except SingularInformation:
            pass
        return SolverReport(p, float(f), it, converged, _active(p, fs), float(kkt),
                            fs.residuals(p), ridge, hist, msg)

    p = feas.witness if initial is None else fs.project(np.asarray(initial, dtype=np.float64))

    # The feasible set collapses to the greedy point when the gain target equals its maximum.
    if (constraints.gain_fraction is not None
            and feas.max_gain - gain_rhs(s, constraints.gain_fraction) * 2 + s.sum()
            <= 1e-12 * max(fs.abs_total, 1.0)):
        ridge = 0.0
        try:
            f = objective_and_gradient(Xt, p, 0.0, config.criterion)[0]
        except SingularInformation:
            M_tr = 2 * float(np.sum(Xt * Xt))
            ridge = 1e-10 * M_tr / (2 * Xt.shape[1])
            f = objective_and_gradient(Xt, p, ridge, config.criterion)[0]
        return finish(p, f, 0, True, 0.0, [f], ridge,
                      "gain constraint at its maximum; feasible set is a single point")

    ridge = 0.0
    try:
        f, g = objective_and_gradient(Xt, p, 0.0, config.criterion)
    except SingularInformation:
        M_tr = 2 * float(np.sum(Xt * Xt))
        ridge = 1e-10 * M_tr / (2 * Xt.shape[1])
        log.warning("information singular at the starting point; adding ridge %.3e", ridge)
        f, g = objective_and_gradient(Xt, p, ridge, config.criterion)

    def fun(q):
        try:
            return objective_and_gradient(Xt, q, ridge, config.criterion)
        except SingularInformation:
            return math.inf, None

    # curvature estimate from a few gradient differences
    rng = np.random.default_rng(0)
    L_hat = 0.0
    for _ in range(3):
        r = rng.standard_normal(problem.n)
        r *= 1e-4 / np.linalg.norm(r)
        fr, gr = fun(p + r)
        if gr is not None:
            L_hat = max(L_hat, np.linalg.norm(gr - g) / np.linalg.norm(r))
    step = 1.0 / L_hat if L_hat > 0 else 1.0

    hist = [f]
    kkt = math.inf
    for it in range(1, config.max_iter + 1):
        kkt = float(np.max(np.abs(p - fs.project(p - g, strict=False))))
        if kkt < config.tol_grad:
            return finish(p, f, it - 1, True, kkt, hist, ridge, "projected gradient below tolerance")
        d = fs.project(p - step * g) - p
        slope = float(g @ d)
        if slope >= 0:
            return finish(p, f, it - 1, kkt <= 10 * config.tol_grad, kkt, hist, ridge,
                          "no descent direction at projection accuracy")
        lam = 1.0
        while True:
            q = p + lam * d
            fq, gq = fun(q)
            if fq <= f + config.armijo_c * lam * slope:
                break
            lam *= config.armijo_shrink
            if lam < 1e-20:
                return finish(p, f, it - 1, kkt <= 10 * config.tol_grad, kkt, hist, ridge,
                              "line search stalled")
        sk = q - p
        yk = gq - g
        sy = float(sk @ yk)
        step = float(sk @ sk) / sy if sy > 0 else step * 10.0
        step = min(max(step, 1e-12), 1e12)
        moved = float(np.max(np.abs(sk))) / max(1.0, float(np.max(np.abs(p))))
        p, f, g = q, fq, gq
        hist.append(f)
        if moved < config.tol_step:
            kkt = float(np.max(np.abs(p - fs.project(p - g, strict=False))))
            return finish(p, f, it, True, kkt, hist, ridge, "relative step below tolerance")
    return finish(p, f, config.max_iter, False, kkt, hist, ridge, "iteration limit reached")


def brute_force_optimum(problem: DesignProblem, constraints: ConstraintSet | None = None,
                        grid_step: float = 0.02, chunk: int = 200_000) -> tuple[np.ndarray, float]:
    """Exhaustive grid search for the minimum of -log det E[U^T U] (n <= 4).

    Points are on the grid {0, step, ..., 1}^n; under a budget the last
    coordinate is solved from the mean instead, so every candidate is exactly
    feasible and the returned objective bounds the true optimum from above.
    """
    constraints = constraints or ConstraintSet()
    n = problem.n
    if n > 4:
        raise TooLarge(f"grid search limited to n <= 4 subjects, got {n}")
    levels = np.round(np.arange(0.0, 1.0 + grid_step / 2, grid_step), 12)
    levels = levels[levels <= 1.0]
    up, um = augment_rows(problem)
    D = np.einsum("ij,ik->ijk", up, up) - np.einsum("ij,ik->ijk", um, um)
    C0 = um.T @ um
    s = problem.running() if constraints.needs_scores else None
    fs = FeasibleSet(n, constraints, s)
    free = n - 1 if constraints.budget is not None else n
    best_p, best_f = None, math.inf
    grid = itertools.product(levels, repeat=free)
    while True:
        block = np.array(list(itertools.islice(grid, chunk)), dtype=np.float64).reshape(-1, free)
        if block.shape[0] == 0:
            break
        if constraints.budget is not None:
            last = n * constraints.budget - block.sum(axis=1)
            block = np.hstack([block, last[:, None]])
            block = block[(last >= -1e-12) & (last <= 1 + 1e-12)]
            block = np.clip(block, 0.0, 1.0)
        keep = np.ones(block.shape[0], dtype=bool)
        if constraints.monotone:
            ps = block[:, fs.order]
            keep &= np.all(np.diff(ps, axis=1) >= -1e-12, axis=1)
            for a, b in zip(fs.group_ptr[:-1], fs.group_ptr[1:]):
                keep &= np.ptp(ps[:, a:b], axis=1) <= 1e-12
        if constraints.gain_fraction is not None:
            keep &= block @ s >= fs.rhs - 1e-12 * max(fs.abs_total, 1.0)
        block = block[keep]
        if block.shape[0] == 0:
            continue
        M = C0 + np.einsum("bi,ijk->bjk", block, D)
        sign, logdet = np.linalg.slogdet(M)
        obj = np.where(sign > 0, -logdet, np.inf)
        j = int(np.argmin(obj))
        if obj[j] < best_f:
            best_f, best_p = float(obj[j]), block[j].copy()
    if best_p is None:
        raise Infeasible("no grid point satisfies the constraints")
    return best_p, best_f
