"""End-to-end replication experiment and plot-ready output.

One replicate = draw n loss events (S_i, Y_i) directly from their
product law Exp(lambda) x G, fit (lambda_hat, G_hat), build the plug-in
transition kernel, solve for the absorption probability and hitting
times, and score everything against the exact pipeline.  The sweep runs
``replicates`` of those per sample size and records integrated squared
errors plus the estimator diagnostics.

Randomness contract: the replicate for sample size n and index j draws
from the stream SeedSequence([global_seed, 0, n, j]); illustration
trajectories use SeedSequence([global_seed, 1, i]).  Rows depend only
on their own stream, so any execution order yields the same table.
"""

import csv
import os
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .densities import PowerDensity
from .estimators import KdeEstimate, estimate_lambda_tmle, sup_norm_diagnostic, \
    weighted_l1_diagnostic
from .fredholm import GridFunction, contraction_bound, default_grid, \
    hitting_time_probs, ise, neumann_solve
from .kernel import KernelSpec, transition_density_batch
from .model import ModelParams, sample_interarrival, sample_loss_fraction, \
    simulate_trajectory, stream_rng
from .quadrature import QuadratureError

# pointwise |p_hat - p| probes recorded per replicate
_P_PROBES = (1.1, 1.5, 2.0, 3.0)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a full experiment run depends on, in one flat record."""

    lam: float = 1.0
    r: float = 1.0
    power_k: float = 10.0
    lambda_lo: float = 0.5
    lambda_hi: float = 2.0
    ns: tuple = (50, 75, 100)
    replicates: int = 100
    m: int = 10
    m_hit: int = 6
    x_eval: float = 1.1
    grid_size: int = 400
    est_grid_size: int = 240
    node_eps: float = 1e-6
    x_max: float = 1000.0
    quad_tol: float = 1e-8
    est_quad_tol: float = 1e-5
    eps0: float = 1e-6
    curve_lo: float = 1.0
    curve_hi: float = 4.0
    curve_points: int = 121
    traj_count: int = 3
    traj_x0: float = 2.0
    traj_horizon: float = 8.0
    global_seed: int = 20260819

    def __post_init__(self):
        if min(self.replicates, self.m_hit, len(self.ns), *self.ns) < 1 or self.m < 0:
            raise ValueError("counts must be >= 1 (m >= 0)")
        if not all(int(n) == n for n in self.ns):
            raise ValueError("sample sizes must be integers")

    def to_text(self):
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "ns":
                v = ",".join(str(int(n)) for n in v)
            elif isinstance(v, float):
                v = repr(float(v))
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, val = (part.strip() for part in line.split("=", 1))
            if key not in known:
                raise ValueError(f"line {lineno}: unknown config key {key!r}")
            kwargs[key] = _parse_value(key, val)
        return cls(**kwargs)


_INT_KEYS = {"replicates", "m", "m_hit", "grid_size", "est_grid_size",
             "curve_points", "traj_count", "global_seed"}


def _parse_value(key, val):
    if key == "ns":
        return tuple(int(part) for part in val.split(",") if part.strip())
    if key in _INT_KEYS:
        return int(val)
    return float(val)


def load_config(path=None, overrides=None):
    """Config from an optional key=value file plus overriding kwargs."""
    if path is None:
        cfg = ExperimentConfig()
    else:
        with open(path, encoding="utf-8") as fh:
            cfg = ExperimentConfig.from_text(fh.read())
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg


@dataclass
class ReplicateTable:
    """Sweep results: one dict per (n, replicate), plus the exact references."""

    config: ExperimentConfig
    rows: list
    refs: dict = field(repr=False, default_factory=dict)

    def ok_rows(self, n=None):
        return [r for r in self.rows
                if r["status"] == "ok" and (n is None or r["n"] == n)]


def _exact_references(cfg):
    g_true = PowerDensity(cfg.power_k)
    spec = KernelSpec(cfg.lam, cfg.r, g_true, cfg.quad_tol)
    nodes = default_grid(cfg.grid_size, cfg.node_eps, cfg.x_max)
    p_ref, report = neumann_solve(spec, nodes, cfg.m, (cfg.x_eval,), cfg.eps0)
    n_terms = max(cfg.m_hit, 4)
    t_ref = hitting_time_probs(spec, nodes, n_terms)
    v_curve = np.linspace(cfg.curve_lo, cfg.curve_hi, cfg.curve_points)
    params = ModelParams(cfg.lam, cfg.r, g_true, cfg.lambda_lo, cfg.lambda_hi)
    trajs = [
        simulate_trajectory(params, cfg.traj_x0, cfg.traj_horizon,
                            stream_rng(cfg.global_seed, 1, i))
        for i in range(cfg.traj_count)
    ]
    return {
        "g_true": g_true,
        "spec": spec,
        "nodes": nodes,
        "p_ref": p_ref,
        "report": report,
        "t_ref": t_ref,
        "v_curve": v_curve,
        "R_row_ref": transition_density_batch(spec, 2.0, v_curve),
        "R_col_ref": transition_density_batch(spec, v_curve, 2.0),
        "est_nodes": default_grid(cfg.est_grid_size, cfg.node_eps, cfg.x_max),
        "diag_grid": np.linspace(0.0, 1.0, 2001),
        "trajectories": trajs,
    }


def _blank_row(n, rep):
    row = {
        "n": int(n), "rep": int(rep), "status": "ok", "reason": "",
        "lambda_hat": None, "lambda_raw": None, "bandwidth": None,
        "sup_norm": None, "weighted_l1": None, "kappa_hat": None,
        "ise_R_row": None, "ise_R_col": None, "ise_p": None,
        "curve_row": None, "curve_col": None, "p_vals": None,
    }
    for k in range(1, 5):
        row[f"ise_t{k}"] = None
    return row


def _one_replicate(cfg, refs, n, rep):
    rng = stream_rng(cfg.global_seed, 0, n, rep)
    s_obs = sample_interarrival(cfg.lam, rng, n)
    y_obs = sample_loss_fraction(refs["g_true"], rng, n)

    row = _blank_row(n, rep)
    lam_est = estimate_lambda_tmle(s_obs, cfg.lambda_lo, cfg.lambda_hi)
    row["lambda_hat"] = lam_est.value
    row["lambda_raw"] = lam_est.raw
    try:
        kde = KdeEstimate(y_obs)
        row["bandwidth"] = kde.bandwidth
        row["sup_norm"] = sup_norm_diagnostic(kde, refs["g_true"], refs["diag_grid"])
        row["weighted_l1"] = weighted_l1_diagnostic(kde, refs["g_true"], cfg.eps0)

        est = KernelSpec(lam_est.value, cfg.r, kde, cfg.est_quad_tol)
        kappa_hat = contraction_bound(est, cfg.eps0)
        row["kappa_hat"] = kappa_hat
        if kappa_hat >= 1.0:
            row["status"] = "kappa_refused"
            row["reason"] = f"estimated contraction bound {kappa_hat:.4g} >= 1"
            return row

        v = refs["v_curve"]
        curve_row = transition_density_batch(est, 2.0, v)
        curve_col = transition_density_batch(est, v, 2.0)
        row["curve_row"] = curve_row
        row["curve_col"] = curve_col
        row["ise_R_row"] = float(np.trapezoid((curve_row - refs["R_row_ref"]) ** 2, v))
        row["ise_R_col"] = float(np.trapezoid((curve_col - refs["R_col_ref"]) ** 2, v))

        p_hat, _ = neumann_solve(est, refs["est_nodes"], cfg.m, (cfg.x_eval,), cfg.eps0)
        t_hat = hitting_time_probs(est, refs["est_nodes"], max(cfg.m_hit, 4))
        row["p_vals"] = p_hat(refs["nodes"])
        row["ise_p"] = ise(refs["p_ref"], p_hat)
        for k in range(1, 5):
            row[f"ise_t{k}"] = ise(refs["t_ref"][k - 1], t_hat[k - 1])
        for k in range(1, cfg.m_hit + 1):
            row[f"t_at{k}"] = (float(t_hat[k - 1](cfg.x_eval)) if k <= len(t_hat)
                               else None)
        for x in _P_PROBES:
            row[f"err_p_{x:g}"] = abs(float(p_hat(x)) - float(refs["p_ref"](x)))
    except (QuadratureError, ValueError, FloatingPointError) as err:
        row["status"] = "failed"
        row["reason"] = f"{type(err).__name__}: {err}"
    return row


def run_replicates(cfg, progress=None):
    """The full sweep: replicates x sample sizes, never aborting on one row."""
    refs = _exact_references(cfg)
    rows = []
    for n in cfg.ns:
        for rep in range(cfg.replicates):
            rows.append(_one_replicate(cfg, refs, int(n), rep))
            if progress is not None:
                progress(rows[-1])
    return ReplicateTable(config=cfg, rows=rows, refs=refs)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _quartiles(values):
    arr = np.asarray(values, dtype=float)
    return float(np.mean(arr)), float(np.quantile(arr, 0.25)), float(np.quantile(arr, 0.75))


def emit_figures(table, outdir):
    """Plot-ready CSVs for every figure; returns the written paths.

    Schemas are documented in the README.  Aggregates use only rows
    with status ok; refusals and failures are counted in summary.csv.
    """
    os.makedirs(outdir, exist_ok=True)
    cfg = table.config
    refs = table.refs
    paths = []
    ns = sorted({r["n"] for r in table.rows})

    rows = []
    for i, traj in enumerate(refs.get("trajectories", ())):
        rows.extend((i, t, x) for t, x in traj.to_rows())
    paths.append(_write_csv(os.path.join(outdir, "trajectories.csv"),
                            ["traj_id", "t", "x"], rows))

    rows = []
    if refs:
        v = refs["v_curve"]
        for label, ref_key, row_key in (("row", "R_row_ref", "curve_row"),
                                        ("col", "R_col_ref", "curve_col")):
            exact = refs[ref_key]
            for n in ns:
                curves = [r[row_key] for r in table.ok_rows(n)]
                if not curves:
                    continue
                stack = np.stack(curves)
                mean = np.mean(stack, axis=0)
                q1 = np.quantile(stack, 0.25, axis=0)
                q3 = np.quantile(stack, 0.75, axis=0)
                rows.extend(
                    (label, float(v[i]), float(exact[i]), n,
                     float(mean[i]), float(q1[i]), float(q3[i]))
                    for i in range(v.size)
                )
    paths.append(_write_csv(os.path.join(outdir, "kernel_curves.csv"),
                            ["curve", "v", "exact", "n", "mean", "q1", "q3"], rows))

    rows = [(r["n"], r["rep"], label, r[key])
            for label, key in (("row", "ise_R_row"), ("col", "ise_R_col"))
            for r in table.rows if r["status"] == "ok"]
    paths.append(_write_csv(os.path.join(outdir, "kernel_ise.csv"),
                            ["n", "replicate", "curve", "ise"], rows))

    rows = []
    if refs:
        nodes = refs["nodes"]
        exact_p = refs["p_ref"].values
        for n in ns:
            stack = [r["p_vals"] for r in table.ok_rows(n)]
            if not stack:
                continue
            stack = np.stack(stack)
            mean = np.mean(stack, axis=0)
            q1 = np.quantile(stack, 0.25, axis=0)
            q3 = np.quantile(stack, 0.75, axis=0)
            rows.extend(
                (float(nodes[i]), float(exact_p[i]), n,
                 float(mean[i]), float(q1[i]), float(q3[i]))
                for i in range(nodes.size)
            )
    paths.append(_write_csv(os.path.join(outdir, "p_curves.csv"),
                            ["x", "exact", "n", "mean", "q1", "q3"], rows))

    rows = [(r["n"], r["rep"], r["ise_p"]) for r in table.rows if r["status"] == "ok"]
    paths.append(_write_csv(os.path.join(outdir, "p_ise.csv"),
                            ["n", "replicate", "ise"], rows))

    rows = [(r["n"], r["rep"], k, r[f"ise_t{k}"])
            for r in table.rows if r["status"] == "ok"
            for k in range(1, 5)]
    paths.append(_write_csv(os.path.join(outdir, "t_ise.csv"),
                            ["n", "replicate", "m", "ise"], rows))

    rows = []
    for n in ns:
        for k in range(1, cfg.m_hit + 1):
            vals = [r[f"t_at{k}"] for r in table.ok_rows(n)
                    if r.get(f"t_at{k}") is not None]
            if not vals:
                continue
            mean, q1, q3 = _quartiles(vals)
            rows.append((n, k, mean, q1, q3))
    paths.append(_write_csv(os.path.join(outdir, "t_dist.csv"),
                            ["n", "m", "mean", "q1", "q3"], rows))

    rows = []
    for n in ns:
        group = [r for r in table.rows if r["n"] == n]
        ok = [r for r in group if r["status"] == "ok"]
        med = {}
        for key in ("ise_R_row", "ise_R_col", "ise_p"):
            vals = [r[key] for r in ok]
            med[key] = float(np.median(vals)) if vals else None
        rows.append((
            n, len(group), len(ok),
            sum(r["status"] == "kappa_refused" for r in group),
            sum(r["status"] == "failed" for r in group),
            med["ise_R_row"], med["ise_R_col"], med["ise_p"],
        ))
    paths.append(_write_csv(os.path.join(outdir, "summary.csv"),
                            ["n", "replicates", "ok", "kappa_refused", "failed",
                             "median_ise_R_row", "median_ise_R_col", "median_ise_p"],
                            rows))
    return paths
