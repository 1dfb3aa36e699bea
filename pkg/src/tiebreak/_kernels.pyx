# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: weighted PAV and the Dykstra projection loop.

Arrays passed to ``dykstra`` are in running-variable order; ``group_ptr``
delimits runs of tied scores (length G+1, first 0, last n).
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, isnan

cnp.import_array()


cdef Py_ssize_t _pav_inplace(double* val, double* wt, Py_ssize_t m,
                             double* bsum, double* bw, Py_ssize_t* blen) noexcept nogil:
    # Nondecreasing weighted isotonic fit of val (weights wt), written back into val.
    cdef Py_ssize_t nb = 0, i, j, k
    cdef double s, w
    cdef Py_ssize_t ln
    for i in range(m):
        s = val[i] * wt[i]
        w = wt[i]
        ln = 1
        while nb > 0 and bsum[nb - 1] * w > s * bw[nb - 1]:
            nb -= 1
            s += bsum[nb]
            w += bw[nb]
            ln += blen[nb]
        bsum[nb] = s
        bw[nb] = w
        blen[nb] = ln
        nb += 1
    k = 0
    for i in range(nb):
        s = bsum[i] / bw[i]
        for j in range(blen[i]):
            val[k] = s
            k += 1
    return nb


def pav(y, w=None):
    """Weighted least-squares nondecreasing fit of ``y``."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.array(y, dtype=np.float64, copy=True)
    cdef Py_ssize_t n = out.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] wt
    if w is None:
        wt = np.ones(n, dtype=np.float64)
    else:
        wt = np.ascontiguousarray(w, dtype=np.float64)
    if n == 0:
        return out
    cdef cnp.ndarray[cnp.float64_t, ndim=1] bsum = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] bw = np.empty(n)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] blen = np.empty(n, dtype=np.intp)
    with nogil:
        _pav_inplace(&out[0], &wt[0], n, &bsum[0], &bw[0], <Py_ssize_t*>&blen[0])
    return out


cdef void _project_box_iso(double* x, Py_ssize_t n, bint monotone,
                           Py_ssize_t* gptr, Py_ssize_t ng,
                           double* gval, double* gw,
                           double* bsum, double* bw, Py_ssize_t* blen) noexcept nogil:
    cdef Py_ssize_t i
    if monotone:
        _project_iso_groups(x, gptr, ng, gval, gw, bsum, bw, blen)
    for i in range(n):
        if x[i] < 0.0:
            x[i] = 0.0
        elif x[i] > 1.0:
            x[i] = 1.0


def dykstra(y, s, group_ptr, bint monotone, double budget_total,
            double gain_rhs, double tol, Py_ssize_t max_sweeps):
    """Dykstra alternating projections onto hyperplane, half-space, box/isotonic.

    ``budget_total`` / ``gain_rhs`` are NaN when the constraint is absent.
    Returns ``(x, sweeps, last_change)``.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x = np.array(y, dtype=np.float64, copy=True)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sv = np.ascontiguousarray(s, dtype=np.float64)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] gp = np.ascontiguousarray(group_ptr, dtype=np.intp)
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t ng = gp.shape[0] - 1
    cdef bint has_budget = not isnan(budget_total)
    cdef bint has_gain = not isnan(gain_rhs)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] inc_b = np.zeros(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] inc_g = np.zeros(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] inc_c = np.zeros(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] z = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] prev = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] gval = np.empty(max(ng, 1))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] gw = np.empty(max(ng, 1))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] bsum = np.empty(max(ng, 1))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] bw = np.empty(max(ng, 1))
    cdef cnp.ndarray[cnp.intp_t, ndim=1] blen = np.empty(max(ng, 1), dtype=np.intp)
    cdef double ss = 0.0, acc, shift, change = 0.0
    cdef Py_ssize_t i, sweep = 0
    if n == 0:
        return x, 0, 0.0
    for i in range(n):
        ss += sv[i] * sv[i]
    with nogil:
        while sweep < max_sweeps:
            sweep += 1
            for i in range(n):
                prev[i] = x[i]
            if has_budget:
                acc = 0.0
                for i in range(n):
                    z[i] = x[i] + inc_b[i]
                    acc += z[i]
                shift = (budget_total - acc) / n
                for i in range(n):
                    x[i] = z[i] + shift
                    inc_b[i] = z[i] - x[i]
            if has_gain:
                acc = 0.0
                for i in range(n):
                    z[i] = x[i] + inc_g[i]
                    acc += sv[i] * z[i]
                if acc < gain_rhs and ss > 0.0:
                    shift = (gain_rhs - acc) / ss
                else:
                    shift = 0.0
                for i in range(n):
                    x[i] = z[i] + shift * sv[i]
                    inc_g[i] = z[i] - x[i]
            for i in range(n):
                z[i] = x[i] + inc_c[i]
                x[i] = z[i]
            _project_box_iso(&x[0], n, monotone, <Py_ssize_t*>&gp[0], ng,
                             &gval[0], &gw[0], &bsum[0], &bw[0], <Py_ssize_t*>&blen[0])
            change = 0.0
            for i in range(n):
                inc_c[i] = z[i] - x[i]
                if fabs(x[i] - prev[i]) > change:
                    change = fabs(x[i] - prev[i])
            if change < tol:
                break
    return x, sweep, change


cdef double _clip_sum(double* v, Py_ssize_t n, double lam, Py_ssize_t* nfree, double* free_sum) noexcept nogil:
    cdef double acc = 0.0, t, fs = 0.0
    cdef Py_ssize_t i, nf = 0
    for i in range(n):
        t = v[i] + lam
        if t <= 0.0:
            pass
        elif t >= 1.0:
            acc += 1.0
        else:
            acc += t
            nf += 1
            fs += v[i]
    nfree[0] = nf
    free_sum[0] = fs
    return acc


cdef double _solve_shift(double* v, Py_ssize_t n, double total) noexcept nogil:
    # lam with sum(clip(v + lam, 0, 1)) == total; safeguarded Newton on a
    # nondecreasing piecewise-linear function.
    cdef double lo = 1e300, hi = -1e300, lam, f, fs, cand
    cdef Py_ssize_t i, nf, it
    for i in range(n):
        if v[i] < lo:
            lo = v[i]
        if v[i] > hi:
            hi = v[i]
    lo, hi = -hi, 1.0 - lo
    lam = 0.5 * (lo + hi)
    for it in range(200):
        f = _clip_sum(v, n, lam, &nf, &fs)
        if f < total:
            lo = lam
        elif f > total:
            hi = lam
        else:
            return lam
        if nf > 0:
            # exact solution if the free set is unchanged
            cand = f - fs - nf * lam  # count of upper-clipped entries
            cand = (total - cand - fs) / nf
            if cand > lo and cand < hi:
                lam = cand
                f = _clip_sum(v, n, lam, &nf, &fs)
                if fabs(f - total) <= 1e-14 * (total + 1.0):
                    return lam
                if f < total:
                    lo = lam
                else:
                    hi = lam
                continue
        lam = 0.5 * (lo + hi)
        if hi - lo <= 1e-16 * (fabs(lo) + fabs(hi) + 1.0):
            break
    return lam


cdef void _eval_dual(double* y, double* s, Py_ssize_t n, double nu, bint monotone,
                     Py_ssize_t* gptr, Py_ssize_t ng, double budget_total, bint has_budget,
                     double* out, double* gval, double* gw,
                     double* bsum, double* bw, Py_ssize_t* blen) noexcept nogil:
    cdef Py_ssize_t i
    cdef double lam = 0.0
    for i in range(n):
        out[i] = y[i] + nu * s[i]
    if monotone:
        _project_iso_groups(out, gptr, ng, gval, gw, bsum, bw, blen)
    if has_budget:
        lam = _solve_shift(out, n, budget_total)
    for i in range(n):
        out[i] += lam
        if out[i] < 0.0:
            out[i] = 0.0
        elif out[i] > 1.0:
            out[i] = 1.0


cdef void _project_iso_groups(double* x, Py_ssize_t* gptr, Py_ssize_t ng,
                              double* gval, double* gw,
                              double* bsum, double* bw, Py_ssize_t* blen) noexcept nogil:
    cdef Py_ssize_t g, i
    cdef double acc
    for g in range(ng):
        acc = 0.0
        for i in range(gptr[g], gptr[g + 1]):
            acc += x[i]
        gw[g] = <double>(gptr[g + 1] - gptr[g])
        gval[g] = acc / gw[g]
    _pav_inplace(gval, gw, ng, bsum, bw, blen)
    for g in range(ng):
        for i in range(gptr[g], gptr[g + 1]):
            x[i] = gval[g]


cdef double _dot(double* a, double* b, Py_ssize_t n) noexcept nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        acc += a[i] * b[i]
    return acc


def dual_project(y, s, group_ptr, bint monotone, double budget_total, double gain_rhs):
    """Exact projection via the budget / gain multipliers.

    Minimizes ||p - y||^2 over box (and isotonic cone) with the optional
    budget and gain constraints by root-finding on the two multipliers.
    Returns ``(p, nu, evaluations)``; p satisfies budget, box and monotonicity
    to rounding and the gain constraint from the feasible side.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sv = np.ascontiguousarray(s, dtype=np.float64)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] gp = np.ascontiguousarray(group_ptr, dtype=np.intp)
    cdef Py_ssize_t n = yv.shape[0]
    cdef Py_ssize_t ng = gp.shape[0] - 1
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] best = np.empty(n)
    cdef Py_ssize_t m = max(ng, 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] gval = np.empty(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] gw = np.empty(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] bsum = np.empty(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] bw = np.empty(m)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] blen = np.empty(m, dtype=np.intp)
    cdef bint has_budget = not isnan(budget_total)
    cdef bint has_gain = not isnan(gain_rhs)
    cdef double lo, hi, glo, ghi, nu, gv, scale = 0.0
    cdef Py_ssize_t evals = 0, it, i
    cdef bint use_secant = True
    if n == 0:
        return out, 0.0, 0
    for i in range(n):
        scale += fabs(sv[i])
    with nogil:
        _eval_dual(&yv[0], &sv[0], n, 0.0, monotone, <Py_ssize_t*>&gp[0], ng, budget_total,
                   has_budget, &out[0], &gval[0], &gw[0], &bsum[0], &bw[0], <Py_ssize_t*>&blen[0])
        evals += 1
        nu = 0.0
        if has_gain and scale > 0.0:
            glo = _dot(&sv[0], &out[0], n)
            if glo < gain_rhs:
                lo = 0.0
                hi = 1.0 / scale * n
                for it in range(400):
                    _eval_dual(&yv[0], &sv[0], n, hi, monotone, <Py_ssize_t*>&gp[0], ng, budget_total,
                               has_budget, &best[0], &gval[0], &gw[0], &bsum[0], &bw[0], <Py_ssize_t*>&blen[0])
                    evals += 1
                    ghi = _dot(&sv[0], &best[0], n)
                    if ghi >= gain_rhs:
                        break
                    lo = hi
                    glo = ghi
                    hi *= 2.0
                # best holds p(hi), which is feasible for the gain constraint
                for it in range(300):
                    if ghi - gain_rhs <= 1e-15 * scale or hi - lo <= 1e-16 * hi:
                        break
                    if use_secant and ghi > glo:
                        nu = lo + (gain_rhs - glo) / (ghi - glo) * (hi - lo)
                        if not (nu > lo and nu < hi):
                            nu = 0.5 * (lo + hi)
                    else:
                        nu = 0.5 * (lo + hi)
                    use_secant = not use_secant
                    _eval_dual(&yv[0], &sv[0], n, nu, monotone, <Py_ssize_t*>&gp[0], ng, budget_total,
                               has_budget, &out[0], &gval[0], &gw[0], &bsum[0], &bw[0], <Py_ssize_t*>&blen[0])
                    evals += 1
                    gv = _dot(&sv[0], &out[0], n)
                    if gv >= gain_rhs:
                        hi = nu
                        ghi = gv
                        for i in range(n):
                            best[i] = out[i]
                    else:
                        lo = nu
                        glo = gv
                nu = hi
                for i in range(n):
                    out[i] = best[i]
    return out, nu, evals
