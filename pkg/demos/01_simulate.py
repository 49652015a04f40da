"""Simulate the growth-fragmentation process, two ways.

The embedded chain records the state right after each jump; the
continuous trajectory follows the deterministic growth between jumps.
Growth freezes once the state enters the absorbing region (0, 1], but
fragmentation jumps keep arriving.
"""

import numpy as np

from gfabsorb import ModelParams, PowerDensity, simulate_chain, simulate_trajectory, stream_rng

params = ModelParams(lam=1.0, r=1.0, g=PowerDensity(10.0), lambda_lo=0.5, lambda_hi=2.0)
rng = stream_rng(42, 0)

chain = simulate_chain(params, x0=2.0, max_jumps=50, rng=rng)
print(f"embedded chain from x0 = {chain.x0}")
print(f"  jumps recorded : {chain.z.size}  (truncated: {chain.truncated})")
print(f"  first 5 states : {np.round(chain.z[:5], 4)}")
if chain.absorbed_at is not None:
    k = chain.absorbed_at
    print(f"  absorbed at jump {k}: z_{k} = {chain.z[k - 1]:.6f}")
else:
    print("  never entered (0, 1] before the jump cap")

# interarrival times are exponential(lam); check the sample mean
print(f"  mean interarrival: {chain.s.mean():.3f}  (expected {1.0 / params.lam})")

traj = simulate_trajectory(params, x0=2.0, horizon=5.0, rng=stream_rng(42, 1))
print(f"\ncontinuous trajectory over [0, {traj.horizon}]")
print(f"  jumps in window : {traj.jump_times.size}")
print(f"  state at t=1.0  : {float(traj.state_at(1.0)[0]):.6f}")
print(f"  state at t={traj.horizon}  : {float(traj.state_at(traj.horizon)[0]):.6f}")

rows = traj.to_rows(points_per_segment=5)
print(f"  plot rows (t, x): {len(rows)} samples, t from {rows[0][0]:.2f} to {rows[-1][0]:.2f}")

# absorption is permanent for the flow: once below 1, growth freezes
frozen = [x for t, x in rows if x <= 1.0]
if frozen:
    print(f"  below 1 in {len(frozen)} of the sampled rows (fragmentation only from there)")
