"""Command line interface: ``tiebreak solve|curve|assign|simulate``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import io
from .assignment import AssignmentRule, probabilities_from_scores, sample_assignment, stratified_assignment
from .config import RunConfig, SimulateConfig, load_config
from .errors import ConfigError, Infeasible, SchemaError, TiebreakError
from .evaluation import empirical_curve
from .model import DesignProblem
from .plot import write_curve_svg
from .projection import ConstraintSet
from .solver import SolverConfig, check_feasibility, solve

log = logging.getLogger("tiebreak")


def _resolve_eta(cfg: RunConfig, d: int, rec: io.Standardization) -> np.ndarray | None:
    if cfg.eta is None:
        return None
    if isinstance(cfg.eta, str):
        # the preset's intercept is dropped: scores use x^T eta only
        if d != 12:
            raise ConfigError(f"preset:mimic-table1 needs 12 covariate columns after standardization, got {d}")
        return io.mimic_eta("appended" if rec.add_squares else "interleaved")
    eta = np.asarray(cfg.eta, dtype=np.float64)
    if eta.shape[0] != d:
        raise ConfigError(f"eta has {eta.shape[0]} entries but the data has {d} covariate columns")
    return eta


def _load(cfg: RunConfig, data: str | None):
    if data is None:
        raise ConfigError("this command needs --data")
    ds = io.ingest(data)
    X, rec = io.standardize(ds.X, ds.columns, cfg.standardize.center_scale, cfg.standardize.add_squares)
    if not rec.columns:
        rec.columns = ds.columns
    eta = _resolve_eta(cfg, X.shape[1], rec)
    return ds.ids, DesignProblem(X, eta), rec


def _constraints(cfg: RunConfig) -> ConstraintSet:
    c = cfg.constraints
    return ConstraintSet(budget=c.mu, monotone=c.monotone, gain_fraction=c.rho)


def _rule(cfg: RunConfig, eta) -> AssignmentRule:
    if eta is None:
        raise ConfigError("the assignment rule needs eta")
    r = cfg.rule
    return AssignmentRule(r.kind, eta, delta=r.delta, delta_q=r.delta_q, p_mid=r.p_mid)


def _grid(cfg: RunConfig) -> np.ndarray:
    g = cfg.delta_grid
    return np.linspace(g.min, g.max, g.count)


def run_solve(cfg: RunConfig, ids, problem: DesignProblem, rec, out: Path) -> dict:
    constraints = _constraints(cfg)
    base = {"command": "solve", "seed": cfg.seed, "config": cfg.model_dump(),
            "n": problem.n, "d": problem.d, "standardization": asdict(rec),
            "eta": None if problem.eta is None else problem.eta.tolist()}
    feas = check_feasibility(problem, constraints)
    if not feas.feasible:
        io.write_json(out / "report.json", {**base, "feasible": False, "certificate": feas.certificate})
        raise Infeasible(feas.certificate, feas.certificate)
    rep = solve(problem, constraints, SolverConfig(**cfg.solver.model_dump()))
    s = problem.running() if problem.eta is not None and np.any(problem.eta) else None
    running = s if s is not None else np.full(problem.n, np.nan)
    io.write_csv(out / "probs.csv", ["id", "running", "p"], zip(ids, running, rep.p_opt))
    report = {**base, "feasible": True, "certificate": feas.certificate,
              "objective": rep.objective, "iterations": rep.iterations, "converged": rep.converged,
              "kkt_residual": rep.kkt_residual, "active_constraints": rep.active_constraints,
              "residuals": rep.residuals, "levels": rep.levels(), "ridge": rep.ridge,
              "message": rep.message, "mean_p": float(rep.p_opt.mean())}
    if s is not None:
        bound = float(np.abs(s).sum())
        gain = float((2 * rep.p_opt - 1) @ s)
        report.update(gain=gain, gain_bound=bound, gain_normalized=gain / bound if bound else None)
    io.write_json(out / "report.json", report)
    return report


def run_curve(cfg: RunConfig, problem: DesignProblem, out: Path):
    curve = empirical_curve(problem, _rule(cfg, problem.eta), _grid(cfg), center=cfg.center)
    io.write_csv(out / "curve.csv",
                 ["delta", "log_efficiency", "gain", "gain_normalized", "log_gain", "status"],
                 zip(curve.delta, curve.log_efficiency, curve.gain, curve.gain_normalized,
                     curve.log_gain, curve.status))
    if cfg.svg:
        write_curve_svg(out / "curve.svg", curve)
    return curve


def _auto_strata(p: np.ndarray, order: np.ndarray, size: int | None) -> list[str]:
    labels = np.empty(p.size, dtype=object)
    for level in np.unique(p):
        members = order[p[order] == level]
        chunks = [members] if size is None else [members[i:i + size] for i in range(0, members.size, size)]
        for j, chunk in enumerate(chunks):
            labels[chunk] = f"p={io.fmt(level)}#{j}"
    return labels.tolist()


def run_assign(cfg: RunConfig, data: str | None, out: Path):
    order = None
    strata = None
    if cfg.assign.probs is not None:
        ids, p, strata = io.read_probs(cfg.assign.probs)
        if data is not None:
            ds = io.ingest(data)
            if sorted(ds.ids) != sorted(ids):
                missing = sorted(set(ds.ids) ^ set(ids))[:5]
                raise SchemaError(f"probs.csv ids do not match the dataset ids (e.g. {missing})")
    else:
        ids, problem, _ = _load(cfg, data)
        X = problem.X - problem.X.mean(axis=0) if cfg.center else problem.X
        s = X @ _rule(cfg, problem.eta).eta
        p = probabilities_from_scores(_rule(cfg, problem.eta), s)
        order = np.argsort(s, kind="stable")
    if cfg.assign.mode == "stratified":
        if strata is None:
            strata = _auto_strata(p, order if order is not None else np.arange(p.size),
                                  cfg.assign.stratum_size)
        z = stratified_assignment(p, strata, cfg.seed)
        io.write_csv(out / "assignments.csv", ["id", "p", "z", "stratum"], zip(ids, p, z, strata))
    else:
        z = sample_assignment(p, cfg.seed)
        io.write_csv(out / "assignments.csv", ["id", "p", "z"], zip(ids, p, z))
    return ids, p, z


def run_simulate(cfg: RunConfig, out: Path) -> dict:
    from .gaussian import GaussianPopulation

    sim = cfg.simulate
    note = None
    if sim.scenario == "builtin" and sim.sigma is None:
        sigma, eta = io.SIM_SIGMA, io.SIM_ETA
        note = ("the built-in scenario has 5 covariates but 6 printed eta entries "
                f"{list(io.SIM_ETA_PRINTED)}; the first five are used")
    else:
        sigma = np.asarray(sim.sigma, dtype=np.float64)
        eta = np.asarray(sim.eta if sim.eta is not None else cfg.eta, dtype=np.float64)
    pop = GaussianPopulation(sigma, eta)
    L = np.linalg.cholesky(pop.sigma)
    rng = np.random.default_rng(cfg.seed)
    X = rng.standard_normal((sim.n, pop.d)) @ L.T
    ids = [str(i + 1) for i in range(sim.n)]
    io.write_dataset(out / "data.csv", ids, X)
    sub = cfg.model_copy(update={"eta": pop.eta.tolist()})
    ids_, problem, rec = _load(sub, str(out / "data.csv"))
    report = run_solve(sub, ids_, problem, rec, out)
    run_curve(sub, problem, out)
    assign_cfg = sub.model_copy(update={"assign": sub.assign.model_copy(update={"probs": str(out / "probs.csv")})})
    if assign_cfg.assign.mode == "independent":
        run_assign(assign_cfg, None, out)
    report.update(command="simulate", simulation={"sigma": pop.sigma.tolist(), "eta": pop.eta.tolist(),
                                                 "n": sim.n, "seed": cfg.seed, "note": note})
    io.write_json(out / "report.json", report)
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tiebreak", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, hlp in [("solve", "optimal treatment probabilities (probs.csv, report.json)"),
                      ("curve", "efficiency/gain over a window grid (curve.csv, curve.svg)"),
                      ("assign", "draw treatment signs (assignments.csv)"),
                      ("simulate", "synthetic Gaussian data plus the full pipeline")]:
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--data", help="input CSV with header id,x1,...,xd")
        p.add_argument("--out", default=".", help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        cfg = load_config(args.config)
        if args.command == "solve":
            ids, problem, rec = _load(cfg, args.data)
            rep = run_solve(cfg, ids, problem, rec, out)
            log.info("objective %.10g after %d iterations", rep["objective"], rep["iterations"])
        elif args.command == "curve":
            _, problem, _ = _load(cfg, args.data)
            run_curve(cfg, problem, out)
        elif args.command == "assign":
            run_assign(cfg, args.data, out)
        else:
            if cfg.simulate is None:
                cfg = cfg.model_copy(update={"simulate": SimulateConfig()})
            run_simulate(cfg, out)
    except Infeasible as exc:
        print(f"tiebreak: {exc.certificate}", file=sys.stderr)
        return 2
    except (ConfigError, SchemaError) as exc:
        print(f"tiebreak: {exc}", file=sys.stderr)
        return 2
    except TiebreakError as exc:
        print(f"tiebreak: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
