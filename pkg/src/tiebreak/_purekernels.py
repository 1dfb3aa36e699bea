"""Pure-Python versions of the compiled kernels in ``_kernels.pyx``.

Same signatures and results; used when the extension is not built or when
``TIEBREAK_PURE_PYTHON`` is set.
"""
from __future__ import annotations

import math

import numpy as np


def _pav_list(val: list[float], wt: list[float]) -> list[float]:
    sums: list[float] = []
    weights: list[float] = []
    lengths: list[int] = []
    for v, w in zip(val, wt):
        s = v * w
        ln = 1
        while sums and sums[-1] * w > s * weights[-1]:
            s += sums.pop()
            w += weights.pop()
            ln += lengths.pop()
        sums.append(s)
        weights.append(w)
        lengths.append(ln)
    out: list[float] = []
    for s, w, ln in zip(sums, weights, lengths):
        out.extend([s / w] * ln)
    return out


def pav(y, w=None) -> np.ndarray:
    """Weighted least-squares nondecreasing fit of ``y``."""
    y = np.asarray(y, dtype=np.float64)
    wt = np.ones(y.shape[0]) if w is None else np.asarray(w, dtype=np.float64)
    return np.array(_pav_list(y.tolist(), wt.tolist()), dtype=np.float64)


def _project_box_iso(x: np.ndarray, monotone: bool, group_ptr: np.ndarray) -> np.ndarray:
    if monotone:
        counts = np.diff(group_ptr).astype(np.float64)
        means = np.add.reduceat(x, group_ptr[:-1]) / counts
        fitted = pav(means, counts)
        x = np.repeat(fitted, counts.astype(np.intp))
    return np.clip(x, 0.0, 1.0)


def dykstra(y, s, group_ptr, monotone: bool, budget_total: float,
            gain_rhs: float, tol: float, max_sweeps: int):
    """Dykstra alternating projections onto hyperplane, half-space, box/isotonic.

    ``budget_total`` / ``gain_rhs`` are NaN when the constraint is absent.
    Returns ``(x, sweeps, last_change)``.
    """
    x = np.array(y, dtype=np.float64, copy=True)
    s = np.asarray(s, dtype=np.float64)
    group_ptr = np.asarray(group_ptr, dtype=np.intp)
    n = x.shape[0]
    if n == 0:
        return x, 0, 0.0
    has_budget = not math.isnan(budget_total)
    has_gain = not math.isnan(gain_rhs)
    ss = float(s @ s)
    inc_b = np.zeros(n)
    inc_g = np.zeros(n)
    inc_c = np.zeros(n)
    sweep = 0
    change = 0.0
    while sweep < max_sweeps:
        sweep += 1
        prev = x
        if has_budget:
            z = x + inc_b
            x = z + (budget_total - z.sum()) / n
            inc_b = z - x
        if has_gain:
            z = x + inc_g
            acc = float(s @ z)
            shift = (gain_rhs - acc) / ss if (acc < gain_rhs and ss > 0.0) else 0.0
            x = z + shift * s
            inc_g = z - x
        z = x + inc_c
        x = _project_box_iso(z, monotone, group_ptr)
        inc_c = z - x
        change = float(np.max(np.abs(x - prev)))
        if change < tol:
            break
    return x, sweep, change


def _solve_shift(v: np.ndarray, total: float) -> float:
    """lam with sum(clip(v + lam, 0, 1)) == total."""
    lo, hi = -float(v.max()), 1.0 - float(v.min())
    lam = 0.5 * (lo + hi)
    for _ in range(200):
        t = v + lam
        free = (t > 0.0) & (t < 1.0)
        f = float(np.sum(np.clip(t, 0.0, 1.0)))
        if f < total:
            lo = lam
        elif f > total:
            hi = lam
        else:
            return lam
        nf = int(free.sum())
        if nf:
            fs = float(v[free].sum())
            cand = (total - (f - fs - nf * lam) - fs) / nf
            if lo < cand < hi:
                lam = cand
                f = float(np.sum(np.clip(v + lam, 0.0, 1.0)))
                if abs(f - total) <= 1e-14 * (total + 1.0):
                    return lam
                if f < total:
                    lo = lam
                else:
                    hi = lam
                continue
        lam = 0.5 * (lo + hi)
        if hi - lo <= 1e-16 * (abs(lo) + abs(hi) + 1.0):
            break
    return lam


def _eval_dual(y, s, nu, monotone, group_ptr, budget_total):
    v = y + nu * s
    if monotone:
        counts = np.diff(group_ptr).astype(np.float64)
        means = np.add.reduceat(v, group_ptr[:-1]) / counts
        v = np.repeat(pav(means, counts), counts.astype(np.intp))
    lam = _solve_shift(v, budget_total) if not math.isnan(budget_total) else 0.0
    return np.clip(v + lam, 0.0, 1.0)


def dual_project(y, s, group_ptr, monotone: bool, budget_total: float, gain_rhs: float):
    """Exact projection via the budget / gain multipliers.

    Minimizes ||p - y||^2 over box (and isotonic cone) with the optional
    budget and gain constraints by root-finding on the two multipliers.
    Returns ``(p, nu, evaluations)``; p satisfies budget, box and monotonicity
    to rounding and the gain constraint from the feasible side.
    """
    y = np.asarray(y, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    group_ptr = np.asarray(group_ptr, dtype=np.intp)
    n = y.shape[0]
    if n == 0:
        return y.copy(), 0.0, 0
    out = _eval_dual(y, s, 0.0, monotone, group_ptr, budget_total)
    evals = 1
    scale = float(np.abs(s).sum())
    if math.isnan(gain_rhs) or scale == 0.0:
        return out, 0.0, evals
    glo = float(s @ out)
    if glo >= gain_rhs:
        return out, 0.0, evals
    lo, hi = 0.0, n / scale
    for _ in range(400):
        best = _eval_dual(y, s, hi, monotone, group_ptr, budget_total)
        evals += 1
        ghi = float(s @ best)
        if ghi >= gain_rhs:
            break
        lo, glo, hi = hi, ghi, 2.0 * hi
    use_secant = True
    for _ in range(300):
        if ghi - gain_rhs <= 1e-15 * scale or hi - lo <= 1e-16 * hi:
            break
        nu = 0.5 * (lo + hi)
        if use_secant and ghi > glo:
            cand = lo + (gain_rhs - glo) / (ghi - glo) * (hi - lo)
            if lo < cand < hi:
                nu = cand
        use_secant = not use_secant
        out = _eval_dual(y, s, nu, monotone, group_ptr, budget_total)
        evals += 1
        gv = float(s @ out)
        if gv >= gain_rhs:
            hi, ghi, best = nu, gv, out
        else:
            lo, glo = nu, gv
    return best, hi, evals
