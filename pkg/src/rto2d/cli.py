"""Command-line front end.

Usage::

    rto2d optimize    --config CFG [--out DIR] [--seed N] [--threads N]
    rto2d analyze     --config CFG [--design CSV]
    rto2d uq-verify   --config CFG
    rto2d grad-verify --config CFG [--design CSV]
    rto2d evaluate    --config CFG --design CSV [--source S --eigenmode K --coeff-range A:B:N]
                      [--xi v1,v2,...]

Exit status: 0 on success, 2 for configuration or argument errors and 3 when
the nonlinear solver fails (a checkpoint of the last design is written).
"""

import argparse
import copy
import logging
import sys
import time
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import io
from .adjoint import cdm_gradient, objective_partials, robust_objective_and_gradient
from .config import build_mesh, build_problem, final_stage, load_config, settings
from .design import project
from .errors import ConfigurationError, InvalidArgumentError, SolverFailure
from .optimize import optimize
from .perturbation import compliance_at, mc_estimate, perturbation_solve
from .stochastic import LoadUncertainty

__all__ = ["main", "build_parser"]

log = logging.getLogger("rto2d")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3
_SOURCES = {"load": 0, "material": 1, "geometry": 2}


def build_parser():
    parser = argparse.ArgumentParser(prog="rto2d", description="Robust topology optimization "
                                     "of hyperelastic structures in 2-D.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", help="output directory (overrides run.output_dir)")
        p.add_argument("--seed", type=int, help="random seed (overrides run.seed)")
        p.add_argument("--threads", type=int, default=None, help="cap on BLAS threads")
        p.add_argument("-v", "--verbose", action="store_true")
        return p

    common(sub.add_parser("optimize", help="run the optimization"))
    p = common(sub.add_parser("analyze", help="perturbation statistics of a design"))
    p.add_argument("--design", help="design CSV (default: uniform design)")
    common(sub.add_parser("uq-verify", help="perturbation vs Monte Carlo statistics"))
    p = common(sub.add_parser("grad-verify", help="adjoint vs central-difference gradient"))
    p.add_argument("--design", help="design CSV (default: uniform design)")
    p = common(sub.add_parser("evaluate", help="compliance of a saved design under given inputs"))
    p.add_argument("--design", required=True, help="design CSV")
    p.add_argument("--source", choices=sorted(_SOURCES), help="uncertainty source to sweep")
    p.add_argument("--eigenmode", type=int, default=1, help="1-based mode (or load component)")
    p.add_argument("--coeff-range", default="-3:3:13", help="A:B:N coefficient sweep")
    p.add_argument("--xi", help="comma-separated full random input instead of a sweep")
    return parser


def _coeff_range(text):
    try:
        a, b, n = text.split(":")
        n = int(n)
        if n < 1:
            raise ValueError
        return np.linspace(float(a), float(b), n)
    except ValueError as exc:
        raise InvalidArgumentError(f"invalid --coeff-range {text!r}; expected A:B:N") from exc


def _out_dir(args, cfg):
    out = args.out or cfg.get("run", "output_dir") or f"runs/{cfg.name}"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _seed(args, cfg):
    return args.seed if args.seed is not None else cfg.seed


def _design(args, problem, cfg):
    if getattr(args, "design", None):
        x = io.read_design_csv(args.design)
        if x.size != problem.mesh.n_ele:
            raise ConfigurationError(f"design has {x.size} entries, mesh has "
                                     f"{problem.mesh.n_ele} elements")
        return x
    return np.full(problem.mesh.n_ele, cfg.get("run", "uniform_design", default=0.5))


# ----------------------------------------------------------------------
def cmd_optimize(args, cfg):
    out = _out_dir(args, cfg)
    problem = build_problem(cfg)
    st = settings(cfg)
    snap = cfg.get("run", "snapshot_interval", default=0)
    mesh = problem.mesh
    for name, block in (("material", problem.stoch.material), ("geometry", problem.stoch.geometry)):
        if block is not None:
            io.write_eigenmodes(out, mesh, block[1], name)

    def callback(it, x, row):
        if snap and it % snap == 0:
            rho_hat = problem.filtered(x)
            rb = project(rho_hat, row["beta"], 0.5)
            io.write_design_csv(out / "snapshots" / f"design_{it:05d}.csv", x, rho_hat, rb)
            io.write_pgm(out / "snapshots" / f"design_{it:05d}.pgm", io.density_image(mesh, rb))

    history = []

    def record(it, x, row):
        history.append(row)
        callback(it, x, row)

    try:
        res = optimize(problem, st, callback=record)
    except SolverFailure as exc:
        io.write_history_csv(out / "history.csv", history)
        ck = out / "checkpoint.csv"
        x = exc.design
        rho_hat = problem.filtered(x)
        io.write_design_csv(ck, x, rho_hat, project(rho_hat, problem.interp.beta, 0.5))
        print(f"solver failure at iteration {exc.iteration}: {exc}; checkpoint: {ck}",
              file=sys.stderr)
        return EXIT_SOLVER
    io.write_history_csv(out / "history.csv", res.history)
    io.export_design(out, mesh, res.x, res.rho_hat, res.rho_bar)
    last = res.history[-1] if res.history else {}
    print(f"done: {len(res.history)} iterations, objective {last.get('objective', float('nan')):.6g}"
          f", outputs in {out}")
    return EXIT_OK


def cmd_analyze(args, cfg):
    out = _out_dir(args, cfg)
    problem = build_problem(cfg)
    if args.design:
        problem = final_stage(problem, cfg)
    x = _design(args, problem, cfg)
    rho_hat = problem.filtered(x)
    sol = perturbation_solve(problem, rho_hat)
    J = objective_partials(sol, problem.alpha).value
    row = {"m": problem.m, "f0": sol.f0, "mean": sol.mean, "std": sol.std, "objective": J,
           "volume_fraction": problem.volume_fraction(rho_hat), "c": sol.state.c}
    io.write_rows_csv(out / "analysis.csv", list(row), [row])
    print(", ".join(f"{k}={v:.6g}" for k, v in row.items()))
    return EXIT_OK


def cmd_uq_verify(args, cfg):
    out = _out_dir(args, cfg)
    base = build_problem(cfg)
    if base.stoch.load is None:
        raise ConfigurationError("uq-verify needs an enabled load uncertainty block")
    seed = _seed(args, cfg)
    n = cfg.get("run", "mc_samples", default=10000)
    sigmas = cfg.get("run", "sigma_values", default=[1.0, 2.0, 4.0])
    x = _design(args, base, cfg)
    rows = []
    for s in sigmas:
        stoch = copy.copy(base.stoch)
        stoch.load = LoadUncertainty(stoch.load.mean, s * s * np.eye(2))
        problem = base.with_(stoch=stoch)
        rho_hat = problem.filtered(x)
        t0 = time.perf_counter()
        sol = perturbation_solve(problem, rho_hat)
        mc = mc_estimate(problem, rho_hat, n, seed, u_init=sol.u0)
        log.info("sigma_P=%g: %d samples in %.1f s (seed %d)", s, n, time.perf_counter() - t0, seed)
        rows.append({"sigma_P": s, "pert_mean": sol.mean, "pert_std": sol.std, "mc_mean": mc.mean,
                     "mc_std": mc.std,
                     "rel_err_mean_pct": 100.0 * abs(sol.mean - mc.mean) / abs(mc.mean),
                     "rel_err_std_pct": 100.0 * abs(sol.std - mc.std) / abs(mc.std),
                     "n_samples": mc.n_samples, "seed": seed})
    cols = ["sigma_P", "pert_mean", "pert_std", "mc_mean", "mc_std", "rel_err_mean_pct",
            "rel_err_std_pct", "n_samples", "seed"]
    io.write_rows_csv(out / "uq_verify.csv", cols, rows)
    for r in rows:
        print(f"sigma_P={r['sigma_P']:g}: mean {r['pert_mean']:.6g} vs {r['mc_mean']:.6g} "
              f"({r['rel_err_mean_pct']:.3f}%), std {r['pert_std']:.6g} vs {r['mc_std']:.6g} "
              f"({r['rel_err_std_pct']:.3f}%), seed {seed}")
    return EXIT_OK


def cmd_grad_verify(args, cfg):
    out = _out_dir(args, cfg)
    problem = build_problem(cfg)
    x = _design(args, problem, cfg)
    h = cfg.get("run", "fd_step", default=1e-6)
    sol = perturbation_solve(problem, problem.filtered(x))
    _, _, _, g = robust_objective_and_gradient(problem, sol)

    def evaluate(xx):
        s = perturbation_solve(problem, problem.filtered(xx), u_init=sol.u0)
        return objective_partials(s, problem.alpha).value

    gc = cdm_gradient(evaluate, x, h)
    rel = np.abs(g - gc) / np.maximum(np.abs(gc), 1e-12)
    rows = [{"element": e, "g_adjoint": g[e], "g_cdm": gc[e], "rel_err": rel[e]}
            for e in range(x.size)]
    io.write_rows_csv(out / "grad_verify.csv", ["element", "g_adjoint", "g_cdm", "rel_err"], rows)
    print(f"max relative error {np.nanmax(rel):.3e} over {np.sum(np.isfinite(rel))} elements")
    return EXIT_OK


def cmd_evaluate(args, cfg):
    out = _out_dir(args, cfg)
    if args.xi is not None:
        problem = final_stage(build_problem(cfg), cfg)
        x = _design(args, problem, cfg)
        xi = np.array([float(v) for v in args.xi.split(",")])
        if xi.size != problem.m:
            raise InvalidArgumentError(f"--xi needs {problem.m} values")
        f, st = compliance_at(problem, problem.filtered(x), xi)
        row = {"compliance": f, "c": st.c}
        io.write_rows_csv(out / "evaluate.csv", list(row), [row])
        print(f"compliance {f:.10g}")
        return EXIT_OK
    if args.source is None:
        raise InvalidArgumentError("evaluate needs --source or --xi")
    mesh = build_mesh(cfg)
    problem = final_stage(build_problem(cfg, sources={args.source}, mesh=mesh), cfg)
    block = _SOURCES[args.source]
    if problem.stoch.blocks[block].stop == problem.stoch.blocks[block].start:
        raise ConfigurationError(f"source {args.source!r} is not enabled in the configuration")
    x = _design(args, problem, cfg)
    rho_hat = problem.filtered(x)
    rows = []
    u = None
    for a in _coeff_range(args.coeff_range):
        xi = problem.stoch.restricted(block, args.eigenmode - 1, a)
        f, st = compliance_at(problem, rho_hat, xi, u)
        u = st.u
        rows.append({"coefficient": a, "compliance": f, "c": st.c})
    name = f"evaluate_{args.source}_mode{args.eigenmode}.csv"
    io.write_rows_csv(out / name, ["coefficient", "compliance", "c"], rows)
    print(f"{len(rows)} rows written to {out / name}")
    return EXIT_OK


_COMMANDS = {"optimize": cmd_optimize, "analyze": cmd_analyze, "uq-verify": cmd_uq_verify,
             "grad-verify": cmd_grad_verify, "evaluate": cmd_evaluate}


def _join_ranges(argv):
    """Attach a ``--coeff-range`` value to its flag so ``-10:10:21`` parses."""
    out, i = [], 0
    while i < len(argv):
        if argv[i] == "--coeff-range" and i + 1 < len(argv):
            out.append(f"--coeff-range={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_join_ranges(argv))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        with threadpool_limits(limits=args.threads):
            return _COMMANDS[args.command](args, cfg)
    except (ConfigurationError, InvalidArgumentError) as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
