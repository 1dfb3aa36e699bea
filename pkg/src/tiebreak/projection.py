"""Euclidean projection onto the feasible set of treatment probabilities.

The set is the intersection of the box [0, 1]^n with, optionally, the budget
hyperplane ``mean(p) = mu``, the isotonic cone in the running-variable order
and the gain half-space ``sum (2p_i - 1) s_i >= rho sum |s_i|``.  Projection
uses Dykstra's algorithm; the box and isotonic cone are projected jointly
(pool-adjacent-violators followed by clipping, which is exact for that
intersection).  Subjects with equal scores are pooled so they always share
one probability under the monotone constraint.

Two projection routes are available.  ``"dykstra"`` runs Dykstra's
alternating projections over the three sets.  ``"exact"`` (the default)
minimizes over the box/isotonic set in closed form for fixed budget and gain
multipliers and root-finds both multipliers; it returns a point that meets
every constraint to rounding, which Dykstra only approaches asymptotically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import NonConvergence


@dataclass(frozen=True)
class ConstraintSet:
    """Declarative constraints on the treatment probabilities.

    Attributes:
        budget: mean treatment rate mu in (0, 1), or None.
        monotone: p nondecreasing in the running variable.
        gain_fraction: rho in [-1, 1]; expected gain must reach rho times the
            RDD maximum ``sum |s_i|``.  None disables the constraint.
    """

    budget: float | None = None
    monotone: bool = False
    gain_fraction: float | None = None

    def __post_init__(self):
        if self.budget is not None and not (0.0 < self.budget < 1.0):
            raise ValueError("budget must lie in (0, 1)")
        if self.gain_fraction is not None and not (-1.0 <= self.gain_fraction <= 1.0):
            raise ValueError("gain_fraction must lie in [-1, 1]")

    @property
    def needs_scores(self) -> bool:
        return self.monotone or self.gain_fraction is not None

    def describe(self) -> dict:
        return {"mu": self.budget, "monotone": self.monotone, "rho": self.gain_fraction}


def running_order(s) -> tuple[np.ndarray, np.ndarray]:
    """Ascending order of ``s`` (ties by index) and pointers to tie-group starts."""
    s = np.asarray(s, dtype=np.float64)
    order = np.argsort(s, kind="stable")
    ss = s[order]
    starts = np.flatnonzero(np.r_[True, ss[1:] != ss[:-1]])
    return order, np.r_[starts, s.size].astype(np.intp)


def gain_rhs(s, rho: float) -> float:
    """Right-hand side c of the gain constraint written as ``s @ p >= c``."""
    s = np.asarray(s, dtype=np.float64)
    return 0.5 * (rho * np.abs(s).sum() + s.sum())


def average_ties(p, s) -> np.ndarray:
    """Replace p by its mean within each group of exactly equal scores."""
    p = np.asarray(p, dtype=np.float64)
    order, ptr = running_order(s)
    counts = np.diff(ptr)
    means = np.add.reduceat(p[order], ptr[:-1]) / counts
    out = np.empty_like(p)
    out[order] = np.repeat(means, counts)
    return out


class FeasibleSet:
    """Precomputed projection data for one (scores, constraints) pair."""

    def __init__(self, n: int, constraints: ConstraintSet, s=None,
                 tol: float = 1e-10, max_sweeps: int = 500, backend: str | None = None,
                 method: str = "exact"):
        if method not in ("exact", "dykstra"):
            raise ValueError(f"unknown projection method {method!r}")
        self.method = method
        self.n = n
        self.constraints = constraints
        self.tol = tol
        self.max_sweeps = max_sweeps
        self._kern = kernels.get_backend(backend)
        if constraints.needs_scores:
            if s is None:
                raise ValueError("monotone and gain constraints need the running variable")
            s = np.asarray(s, dtype=np.float64)
            if s.shape[0] != n:
                raise ValueError("running variable has the wrong length")
        self.s = s
        if s is not None:
            self.order, self.group_ptr = running_order(s)
        else:
            self.order = np.arange(n)
            self.group_ptr = np.arange(n + 1, dtype=np.intp)
        self._s_sorted = s[self.order] if s is not None else np.zeros(n)
        self.budget_total = n * constraints.budget if constraints.budget is not None else math.nan
        self.rhs = gain_rhs(s, constraints.gain_fraction) if constraints.gain_fraction is not None else math.nan
        self.abs_total = float(np.abs(s).sum()) if s is not None else 0.0
        self.last_sweeps = 0

    def residuals(self, p) -> dict:
        """Constraint violations of p (all zero when feasible)."""
        p = np.asarray(p, dtype=np.float64)
        out = {"box": float(max(0.0, -p.min(), p.max() - 1.0))}
        c = self.constraints
        if c.budget is not None:
            out["budget"] = float(abs(p.mean() - c.budget))
        if c.monotone:
            ps = p[self.order]
            out["monotone"] = float(max(0.0, np.max(ps[:-1] - ps[1:], initial=0.0)))
            counts = np.diff(self.group_ptr)
            if np.any(counts > 1):
                hi = np.maximum.reduceat(ps, self.group_ptr[:-1])
                lo = np.minimum.reduceat(ps, self.group_ptr[:-1])
                out["ties"] = float(np.max(hi - lo))
        if c.gain_fraction is not None:
            out["gain"] = float(max(0.0, self.rhs - self.s @ p))
        return out

    def is_feasible(self, p, tol: float = 1e-8) -> bool:
        r = self.residuals(p)
        scale = {"gain": max(self.abs_total, 1.0)}
        return all(v <= tol * scale.get(k, 1.0) for k, v in r.items())

    def project(self, y, strict: bool = True) -> np.ndarray:
        """Euclidean projection of y onto the feasible set.

        With ``strict`` a Dykstra run that ends infeasible raises NonConvergence.
        """
        y = np.asarray(y, dtype=np.float64)
        c = self.constraints
        if self.method == "exact":
            x, _, evals = self._kern.dual_project(
                y[self.order], self._s_sorted, self.group_ptr, bool(c.monotone),
                self.budget_total, self.rhs)
            self.last_sweeps = evals
            out = np.empty_like(x)
            out[self.order] = x
            return out
        x, sweeps, change = self._kern.dykstra(
            y[self.order], self._s_sorted, self.group_ptr, bool(c.monotone),
            self.budget_total, self.rhs, self.tol, self.max_sweeps)
        self.last_sweeps = sweeps
        out = np.empty_like(x)
        out[self.order] = x
        if strict and change >= self.tol and not self.is_feasible(out):
            raise NonConvergence(
                f"Dykstra projection stopped after {sweeps} sweeps with change {change:.3e}",
                residual=max(self.residuals(out).values()))
        return out


def project_feasible(p, constraints: ConstraintSet, s=None, tol: float = 1e-10,
                     max_sweeps: int = 500, method: str = "dykstra") -> np.ndarray:
    """Project ``p`` onto the constraint set (see FeasibleSet).

    ``s`` is the running variable; its stable ascending sort fixes the
    monotone order.
    """
    p = np.asarray(p, dtype=np.float64)
    return FeasibleSet(p.shape[0], constraints, s, tol, max_sweeps, method=method).project(p)
