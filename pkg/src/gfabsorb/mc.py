"""Monte-Carlo oracle for absorption probability and jump index.

Simulates the embedded chain directly and counts the first jump index
at which the state drops to 1 or below.  This is a completely separate
route to p(x) and t_m(x) from the Fredholm solver: nothing here touches
the transition density or any quadrature, so agreement between the two
is a real cross-check, not a tautology.

Paths are processed in fixed-size chunks, each with its own child RNG
stream spawned from the caller's generator.  Per-chunk results are
integer counts merged by summation, so any processing order (serial or
parallel) produces identical totals.
"""

import json
from dataclasses import dataclass

import numpy as np

from .model import sample_interarrival

CHUNK = 65536


@dataclass(frozen=True)
class McReport:
    """Absorption frequencies from direct simulation."""

    x0: float
    n_paths: int
    m_cap: int
    p_hat: float
    se: float
    jump_hist: np.ndarray  # counts, index k-1 holds absorption at jump k
    truncated_frac: float

    def hist_prob(self, k):
        """Estimated t_k(x0) = fraction absorbed exactly at jump k."""
        if not 1 <= k <= self.m_cap:
            raise ValueError(f"k must lie in [1, {self.m_cap}]")
        return float(self.jump_hist[k - 1] / self.n_paths)

    def hist_se(self, k):
        p = self.hist_prob(k)
        return float(np.sqrt(p * (1.0 - p) / self.n_paths))

    def to_json(self):
        return json.dumps({
            "x0": self.x0,
            "n_paths": self.n_paths,
            "m_cap": self.m_cap,
            "p_hat": self.p_hat,
            "se": self.se,
            "jump_hist": [int(c) for c in self.jump_hist],
            "truncated_frac": self.truncated_frac,
        })


def _mc_chunk(params, x0, m_cap, size, rng):
    """Absorption-index counts for one chunk of paths."""
    hist = np.zeros(m_cap, dtype=np.int64)
    z = np.full(size, float(x0))
    lam, r, g = params.lam, params.r, params.g
    for k in range(1, m_cap + 1):
        s = sample_interarrival(lam, rng, z.size)
        y = g.sample(rng, z.size)
        z = ((z - 1.0) * np.exp(r * s) + 1.0) * y
        absorbed = z <= 1.0
        hist[k - 1] = np.count_nonzero(absorbed)
        z = z[~absorbed]
        if z.size == 0:
            break
    return hist, z.size


def mc_absorption(params, x0, m_cap=200, n_paths=100_000, rng=None):
    """Directly simulated absorption report from start state x0 > 1.

    jump_hist[k-1] / n_paths estimates t_k(x0) and p_hat estimates the
    probability of absorption within m_cap jumps; with m_cap large the
    leftover truncated_frac approximates the escape probability.
    """
    if x0 <= 1.0:
        raise ValueError("the oracle starts outside the absorbing set, x0 > 1")
    if n_paths < 1 or m_cap < 1:
        raise ValueError("need n_paths >= 1 and m_cap >= 1")
    if rng is None:
        rng = np.random.default_rng(0)
    n_chunks = (n_paths + CHUNK - 1) // CHUNK
    streams = rng.bit_generator.seed_seq.spawn(n_chunks)
    hist = np.zeros(m_cap, dtype=np.int64)
    survivors = 0
    left = n_paths
    for ss in streams:
        size = min(CHUNK, left)
        left -= size
        h, alive = _mc_chunk(params, x0, m_cap, size, np.random.default_rng(ss))
        hist += h
        survivors += alive
    absorbed = int(hist.sum())
    p_hat = absorbed / n_paths
    se = float(np.sqrt(p_hat * (1.0 - p_hat) / n_paths))
    return McReport(
        x0=float(x0),
        n_paths=int(n_paths),
        m_cap=int(m_cap),
        p_hat=p_hat,
        se=se,
        jump_hist=hist,
        truncated_frac=survivors / n_paths,
    )
