"""Command line front end.

Subcommands mirror the library layers: simulate, estimate, kernel,
solve, hitting, validate, replicate.  Exit codes: 0 success, 1 usage or
input error, 2 numerical failure (divergent integral, contraction bound
at or above one, quadrature that will not converge).
"""

import argparse
import csv
import dataclasses
import json
import sys

import numpy as np

from .densities import DivergentIntegralError, PowerDensity
from .estimators import KdeEstimate, estimate_lambda_tmle, estimator_report
from .experiment import emit_figures, load_config, run_replicates
from .fredholm import ContractionError, default_grid, hitting_time_probs, neumann_solve
from .kernel import KernelSpec, transition_density_batch
from .mc import mc_absorption
from .model import ModelParams, sample_interarrival, sample_loss_fraction, \
    simulate_chain, simulate_trajectory, stream_rng
from .quadrature import QuadratureError

_NUMERICAL = (ContractionError, DivergentIntegralError, QuadratureError,
              FloatingPointError)


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the contract here is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common_flags(sub):
    sub.add_argument("--seed", type=int, default=None,
                     help="global seed (overrides config)")
    sub.add_argument("--config", default=None,
                     help="key = value config file")
    sub.add_argument("--out", default=None,
                     help="output path (file, or directory for replicate)")
    sub.add_argument("--quad-tol", type=float, default=None,
                     help="relative quadrature tolerance")
    sub.add_argument("--grid-size", type=int, default=None,
                     help="number of solver grid nodes")
    sub.add_argument("--xmax", type=float, default=None,
                     help="domain truncation point")


def _config_from(args):
    overrides = {}
    if args.seed is not None:
        overrides["global_seed"] = args.seed
    if args.quad_tol is not None:
        overrides["quad_tol"] = args.quad_tol
    if args.grid_size is not None:
        overrides["grid_size"] = args.grid_size
    if args.xmax is not None:
        overrides["x_max"] = args.xmax
    return load_config(args.config, overrides)


def _out_handle(args):
    if args.out is None:
        return sys.stdout, False
    return open(args.out, "w", newline="", encoding="utf-8"), True


def _write_rows(args, header, rows):
    fh, close = _out_handle(args)
    try:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, float) else v
                        for v in row])
    finally:
        if close:
            fh.close()


def _model(cfg):
    return ModelParams(cfg.lam, cfg.r, PowerDensity(cfg.power_k),
                       cfg.lambda_lo, cfg.lambda_hi)


def _read_sy(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"s", "y"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: need CSV columns 's' and 'y'")
        pairs = [(float(row["s"]), float(row["y"])) for row in reader
                 if row["s"] != "" and row["y"] != ""]
    if not pairs:
        raise ValueError(f"{path}: no data rows")
    arr = np.asarray(pairs)
    return arr[:, 0], arr[:, 1]


def _synthetic_sy(cfg, n):
    rng = stream_rng(cfg.global_seed, 2)
    g = PowerDensity(cfg.power_k)
    return sample_interarrival(cfg.lam, rng, n), sample_loss_fraction(g, rng, n)


def _fit(args, cfg):
    if args.data is not None:
        s_obs, y_obs = _read_sy(args.data)
    else:
        s_obs, y_obs = _synthetic_sy(cfg, args.n)
    lam_est = estimate_lambda_tmle(s_obs, cfg.lambda_lo, cfg.lambda_hi)
    return lam_est, KdeEstimate(y_obs)


def _cmd_simulate(args):
    cfg = _config_from(args)
    params = _model(cfg)
    rng = stream_rng(cfg.global_seed, 2)
    if args.trajectory:
        traj = simulate_trajectory(params, args.x0, args.horizon, rng)
        _write_rows(args, ["t", "x"], traj.to_rows())
    else:
        path = simulate_chain(params, args.x0, args.max_jumps, rng)
        fh, close = _out_handle(args)
        try:
            path.write_csv(fh)
        finally:
            if close:
                fh.close()
    return 0


def _cmd_estimate(args):
    cfg = _config_from(args)
    if args.data is not None:
        s_obs, y_obs = _read_sy(args.data)
    else:
        s_obs, y_obs = _synthetic_sy(cfg, args.n)
    lam_est = estimate_lambda_tmle(s_obs, cfg.lambda_lo, cfg.lambda_hi)
    kde = KdeEstimate(y_obs)
    report = estimator_report(lam_est, kde, PowerDensity(cfg.power_k), cfg.eps0)
    fh, close = _out_handle(args)
    try:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    finally:
        if close:
            fh.close()
    return 0


def _cmd_kernel(args):
    cfg = _config_from(args)
    exact = KernelSpec(cfg.lam, cfg.r, PowerDensity(cfg.power_k), cfg.quad_tol)
    lam_est, kde = _fit(args, cfg)
    plug = KernelSpec(lam_est.value, cfg.r, kde, cfg.est_quad_tol)
    y = np.linspace(cfg.curve_lo, cfg.curve_hi, cfg.curve_points)
    ref = transition_density_batch(exact, args.x, y)
    hat = transition_density_batch(plug, args.x, y)
    _write_rows(args, ["x", "y", "R", "R_hat", "abs_err"],
                [(args.x, float(yv), float(rv), float(hv), float(abs(rv - hv)))
                 for yv, rv, hv in zip(y, ref, hat)])
    return 0


def _solver_inputs(cfg):
    spec = KernelSpec(cfg.lam, cfg.r, PowerDensity(cfg.power_k), cfg.quad_tol)
    grid = default_grid(cfg.grid_size, cfg.node_eps, cfg.x_max)
    return spec, grid


def _cmd_solve(args):
    cfg = _config_from(args)
    spec, grid = _solver_inputs(cfg)
    p_m, report = neumann_solve(spec, grid, cfg.m, (cfg.x_eval,), cfg.eps0)
    _write_rows(args, ["x", "p_m"], list(zip(grid.tolist(), p_m.values.tolist())))
    dest = sys.stdout if args.out is not None else sys.stderr
    dest.write(report.to_json() + "\n")
    return 0


def _cmd_hitting(args):
    cfg = _config_from(args)
    spec, grid = _solver_inputs(cfg)
    terms = hitting_time_probs(spec, grid, cfg.m_hit)
    header = ["x"] + [f"t_{k}" for k in range(1, cfg.m_hit + 1)]
    cols = [t.values for t in terms]
    _write_rows(args, header,
                [(float(grid[i]), *(float(c[i]) for c in cols))
                 for i in range(grid.size)])
    return 0


def _cmd_validate(args):
    cfg = _config_from(args)
    spec, grid = _solver_inputs(cfg)
    p_m, report = neumann_solve(spec, grid, cfg.m, (args.x0,), cfg.eps0)
    mc = mc_absorption(_model(cfg), args.x0, m_cap=cfg.m + 1,
                       n_paths=args.paths, rng=stream_rng(cfg.global_seed, 3))
    p_solver = float(p_m(args.x0))
    diff = abs(p_solver - mc.p_hat)
    bound = 3.0 * mc.se + report.tail_bound + report.truncation_diag
    out = {
        "x0": args.x0,
        "p_solver": p_solver,
        "p_mc": mc.p_hat,
        "abs_diff": diff,
        "bound_3se_tail_trunc": bound,
        "agrees": bool(diff <= bound),
        "solver": json.loads(report.to_json()),
        "mc": json.loads(mc.to_json()),
    }
    fh, close = _out_handle(args)
    try:
        json.dump(out, fh, indent=2)
        fh.write("\n")
    finally:
        if close:
            fh.close()
    return 0


def _cmd_replicate(args):
    cfg = _config_from(args)
    if args.ns is not None:
        cfg = dataclasses.replace(cfg, ns=tuple(int(v) for v in args.ns.split(",")))
    if args.replicates is not None:
        cfg = dataclasses.replace(cfg, replicates=args.replicates)
    outdir = args.out if args.out is not None else "figures"
    progress = None
    if args.verbose:
        def progress(row):
            print(f"n={row['n']} rep={row['rep']} {row['status']}", file=sys.stderr)
    table = run_replicates(cfg, progress=progress)
    for path in emit_figures(table, outdir):
        print(path)
    return 0


def build_parser():
    parser = _Parser(prog="gfabsorb",
                     description="Absorbing growth-fragmentation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate one chain or trajectory")
    p.add_argument("--x0", type=float, default=2.0)
    p.add_argument("--max-jumps", type=int, default=200)
    p.add_argument("--trajectory", action="store_true",
                   help="emit the continuous path instead of the chain")
    p.add_argument("--horizon", type=float, default=8.0)
    _common_flags(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("estimate", help="fit (lambda, G) and report diagnostics")
    p.add_argument("--data", default=None, help="CSV with columns s,y")
    p.add_argument("--n", type=int, default=100,
                   help="synthetic sample size when --data is omitted")
    _common_flags(p)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("kernel", help="exact vs plug-in transition density")
    p.add_argument("--data", default=None, help="CSV with columns s,y")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--x", type=float, default=2.0, help="start point of the row")
    _common_flags(p)
    p.set_defaults(func=_cmd_kernel)

    p = sub.add_parser("solve", help="absorption probability p_m on the grid")
    _common_flags(p)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("hitting", help="hitting-time distribution t_1..t_m")
    _common_flags(p)
    p.set_defaults(func=_cmd_hitting)

    p = sub.add_parser("validate", help="solver vs Monte Carlo cross-check")
    p.add_argument("--x0", type=float, default=2.0)
    p.add_argument("--paths", type=int, default=100_000)
    _common_flags(p)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("replicate", help="full replication sweep, CSV figures")
    p.add_argument("--ns", default=None, help="comma list of sample sizes")
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--verbose", action="store_true")
    _common_flags(p)
    p.set_defaults(func=_cmd_replicate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _NUMERICAL as err:
        print(f"gfabsorb: numerical failure: {err}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as err:
        print(f"gfabsorb: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
