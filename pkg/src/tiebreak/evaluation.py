"""Sample-based efficiency and gain of given designs, and tradeoff curves."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import NamedTuple

import numpy as np

from .assignment import AssignmentRule, probabilities_from_scores
from .curve import TradeoffCurve
from .errors import SingularInformation
from .model import DesignProblem, as_probabilities, cholesky, expected_information, neg_log_det


class Gain(NamedTuple):
    gain: float
    bound: float

    @property
    def normalized(self) -> float:
        return self.gain / self.bound if self.bound > 0 else float("nan")


def empirical_gain(problem: DesignProblem, p) -> Gain:
    """Expected gain ``sum (2p_i - 1) s_i`` and its RDD maximum ``sum |s_i|``."""
    p = as_probabilities(p, problem.n)
    s = problem.running()
    return Gain(float((2.0 * p - 1.0) @ s), float(np.abs(s).sum()))


def estimate_N(problem: DesignProblem, p) -> np.ndarray:
    """Per-observation off-diagonal information block (1/n) X~^T diag(2p - 1) X~."""
    p = as_probabilities(p, problem.n)
    Xt = problem.Xtilde
    return Xt.T @ ((2.0 * p - 1.0)[:, None] * Xt) / problem.n


def schur_log_det(problem: DesignProblem, p) -> tuple[float, float]:
    """log det(E[U^T U]/n) computed directly and via the Schur complement.

    The second value is log det(S) + log det(S - N S^{-1} N) with S the
    sample second-moment matrix of x~ and N from ``estimate_N``.
    """
    direct = -neg_log_det(expected_information(problem, p, scale="per-observation"))
    Xt = problem.Xtilde
    S = Xt.T @ Xt / problem.n
    N = estimate_N(problem, p)
    L = cholesky(S)
    W = np.linalg.solve(L, N)
    schur = S - W.T @ W
    return direct, -neg_log_det(S) - neg_log_det((schur + schur.T) / 2)


def _threads() -> int | None:
    raw = os.environ.get("TIEBREAK_THREADS")
    if not raw:
        return None
    n = int(raw)
    if n < 1:
        raise ValueError("TIEBREAK_THREADS must be a positive integer")
    return n


def empirical_curve(problem: DesignProblem, rule: AssignmentRule, delta_grid,
                    center: bool = True) -> TradeoffCurve:
    """Efficiency and gain of the rule family over an increasing window grid.

    Grid values replace ``rule.delta`` (``rule.delta_q`` for quantile rules).
    Columns are centered by their sample means before scoring when
    ``center`` is set; the information matrix is unaffected by centering.
    Singular designs are recorded per point, not raised.
    """
    grid = np.asarray(delta_grid, dtype=np.float64).ravel()
    if grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("delta grid must be nonempty and strictly increasing")
    X = problem.X
    shift = X.mean(axis=0) if center else np.zeros(problem.d)
    cproblem = DesignProblem(X - shift, rule.eta)
    s = cproblem.running()
    bound = float(np.abs(s).sum())

    def point(delta):
        r = replace(rule, delta_q=delta) if rule.kind == "quantile" else replace(rule, delta=delta)
        p = probabilities_from_scores(r, s)
        gain = float((2.0 * p - 1.0) @ s)
        try:
            return -neg_log_det(expected_information(cproblem, p)), gain, "ok"
        except SingularInformation as exc:
            return float("nan"), gain, f"singular: {exc}"

    workers = _threads()
    if workers == 1 or grid.size == 1:
        rows = [point(dv) for dv in grid]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(point, grid))
    log_eff, gain, status = zip(*rows)
    meta = {"rule": rule.describe(), "kind": rule.kind, "n": problem.n, "d": problem.d,
            "centering": shift.tolist()}
    return TradeoffCurve(grid, np.array(log_eff), np.array(gain), bound, tuple(status), meta)
