"""Check the solver against a blunt Monte Carlo oracle.

One million simulated paths per start state, capped at the same jump
count the series uses, give a binomial confidence band; the solver
value has to land inside it (plus its own stated error terms).
"""

import numpy as np

from gfabsorb import (
    KernelSpec,
    ModelParams,
    PowerDensity,
    default_grid,
    hitting_time_probs,
    mc_absorption,
    neumann_solve,
    stream_rng,
)

g = PowerDensity(10.0)
params = ModelParams(lam=1.0, r=1.0, g=g, lambda_lo=0.5, lambda_hi=2.0)
spec = KernelSpec(lam=1.0, r=1.0, g=g, quad_tol=1e-8)
grid = default_grid(400, x_max=1000.0)

print("absorption probability, solver vs Monte Carlo (1e6 paths each)")
for key, x0 in enumerate((1.1, 1.5, 2.0)):
    p, report = neumann_solve(spec, grid, m=10, x_eval=(x0,))
    mc = mc_absorption(params, x0, m_cap=11, n_paths=1_000_000, rng=stream_rng(5, key))
    solver_val = float(p(np.array([x0]))[0])
    gap = abs(solver_val - mc.p_hat)
    budget = 3.0 * mc.se + report.tail_bound + report.truncation_diag
    verdict = "ok" if gap <= budget else "DISAGREE"
    print(f"  x0 = {x0}: solver {solver_val:.6f}  mc {mc.p_hat:.6f} (se {mc.se:.1e})"
          f"  gap {gap:.2e} <= budget {budget:.2e}  {verdict}")

print("\nhitting-time law at x0 = 1.1, first four jumps")
ts = hitting_time_probs(spec, grid, m_max=4)
mc = mc_absorption(params, 1.1, m_cap=4, n_paths=1_000_000, rng=stream_rng(5, 99))
for m in range(1, 5):
    solver_val = float(ts[m - 1](np.array([1.1]))[0])
    mc_val = mc.hist_prob(m)
    se = mc.hist_se(m)
    verdict = "ok" if abs(solver_val - mc_val) <= 3.0 * se else "DISAGREE"
    print(f"  t_{m}: solver {solver_val:.6f}  mc {mc_val:.6f} (se {se:.1e})  {verdict}")
