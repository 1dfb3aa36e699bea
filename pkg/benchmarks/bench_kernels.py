"""Compare the compiled and pure-Python projection kernels.

Usage: python3 benchmarks/bench_kernels.py [--n 2000] [--repeat 5]
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from tiebreak import ConstraintSet, DesignProblem, SolverConfig, solve
from tiebreak.io import SIM_ETA, SIM_SIGMA
from tiebreak.kernels import BACKENDS
from tiebreak.projection import gain_rhs, running_order


def cases(n: int, seed: int = 0):
    r = np.random.default_rng(seed)
    s = r.normal(size=n)
    order, ptr = running_order(s)
    y = r.normal(0.4, 0.5, size=n)
    args = (y, s[order], ptr, True, 0.3 * n, gain_rhs(s, 0.5))
    X = r.standard_normal((n, 5)) @ np.linalg.cholesky(SIM_SIGMA).T
    problem = DesignProblem(X, SIM_ETA)
    c = ConstraintSet(budget=0.3, monotone=True, gain_fraction=0.5)
    return {
        "pav": lambda k: k.pav(y),
        "dual_project": lambda k: k.dual_project(*args),
        "dykstra(200 sweeps)": lambda k: k.dykstra(*args, 0.0, 200),
        "solve mu+rho+monotone": lambda name: solve(problem, c, SolverConfig(), backend=name),
        "solve mu+rho": lambda name: solve(problem, ConstraintSet(budget=0.3, gain_fraction=0.5),
                                           SolverConfig(), backend=name),
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    names = sorted(BACKENDS)
    print(f"n = {args.n}, best of {args.repeat}; backends: {', '.join(names)}")
    print(f"{'case':<24}" + "".join(f"{b:>12}" for b in names) + ("     speedup" if len(names) > 1 else ""))
    for label, fn in cases(args.n).items():
        times = []
        for b in names:
            target = b if label.startswith("solve") else BACKENDS[b]
            times.append(min(timeit.repeat(lambda: fn(target), number=1, repeat=args.repeat)))
        row = f"{label:<24}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times)
        if len(names) > 1:
            row += f"{times[names.index('python')] / times[names.index('cython')]:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
