"""Solve for the absorption probability and the hitting-time law.

The probability p(x) of ever entering (0, 1] satisfies a Fredholm
equation of the second kind, p = s + Kp, whose Neumann partial sum
after m terms carries an explicit geometric tail bound.  The partial
sums themselves are the hitting-time distribution: term k is the
probability of first absorption at jump k.
"""

import numpy as np

from gfabsorb import (
    KernelSpec,
    PowerDensity,
    contraction_bound,
    default_grid,
    hitting_time_probs,
    neumann_solve,
    source_at,
)

spec = KernelSpec(lam=1.0, r=1.0, g=PowerDensity(10.0), quad_tol=1e-8)

kappa = contraction_bound(spec)
print(f"operator norm bound kappa = {kappa:.6f} (< 1, so the series converges)")

grid = default_grid(400, x_max=1000.0)
p, report = neumann_solve(spec, grid, m=10, x_eval=(1.1, 1.5, 2.0, 3.0))
print(f"\nNeumann partial sum with m = {report.m} terms on {grid.size} nodes")
print(f"  source norm ||s||_1 : {report.s_norm:.6f}")
print(f"  series tail bound   : {report.tail_bound:.3e}")
print(f"  truncation diag     : {report.truncation_diag:.3e}")

print("\nabsorption probability p(x)")
print(f"  one-jump floor s(x) <= p(x) <= 1")
for x in (1.1, 1.5, 2.0, 3.0):
    px = float(p(np.array([x]))[0])
    print(f"  p({x:3.1f}) = {px:.6f}   (s = {source_at(spec, x):.6f})")

ts = hitting_time_probs(spec, grid, m_max=6)
x0 = 1.1
probs = np.array([t(np.array([x0]))[0] for t in ts])
print(f"\nfirst-absorption law from x0 = {x0} (t_m = P[absorbed at jump m])")
for m, q in enumerate(probs, start=1):
    print(f"  t_{m}({x0}) = {q:.6f}")
print(f"  partial sums -> p({x0}) = {p(np.array([x0]))[0]:.6f}")
print(f"  remaining mass after 6 jumps: {p(np.array([x0]))[0] - probs.sum():.3e}")
