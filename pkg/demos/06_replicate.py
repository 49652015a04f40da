"""Run a miniature version of the replication experiment.

The real study uses 100 replicates per sample size and takes ~10
minutes; this demo shrinks everything so it finishes in seconds while
exercising the identical pipeline: simulate, fit, plug in, solve,
score against the exact curves, emit plot-ready CSV files.
"""

import pathlib
import tempfile

import numpy as np

from gfabsorb import ExperimentConfig, emit_figures, run_replicates

cfg = ExperimentConfig(
    ns=(20, 40),
    replicates=8,
    m=6,
    m_hit=3,
    grid_size=120,
    est_grid_size=100,
    curve_points=41,
    quad_tol=1e-7,
    est_quad_tol=1e-4,
    traj_count=1,
    x_max=500.0,
)

done = []
table = run_replicates(cfg, progress=done.append)
ok = table.ok_rows()
print(f"replicate sweep: {len(table.rows)} runs, {len(ok)} usable")

print("\nmedian integrated squared error of the plug-in curves")
print("  metric        " + "".join(f"n={n:<8d}" for n in cfg.ns))
for key in ("ise_R_row", "ise_p", "ise_t1"):
    meds = []
    for n in cfg.ns:
        vals = [row[key] for row in ok if row["n"] == n]
        meds.append(np.median(vals))
    trend = "shrinking" if meds == sorted(meds, reverse=True) else "mixed"
    print(f"  {key:<12s}" + "".join(f"{m:<10.2e}" for m in meds) + f"  ({trend})")

outdir = pathlib.Path(tempfile.mkdtemp(prefix="gfabsorb_demo_"))
files = emit_figures(table, outdir)
print(f"\nwrote {len(files)} CSV files to {outdir}")
for f in sorted(pathlib.Path(p).name for p in files):
    print(f"  {f}")
