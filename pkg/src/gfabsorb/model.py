"""Absorbing growth-fragmentation dynamics.

Between jumps the state grows deterministically,

    phi(x, t) = (x - 1) e^{r t} + 1   for x > 1,
    phi(x, t) = x                     for x <= 1,

so [0, 1] is absorbing for the flow.  Jumps arrive at constant rate
lambda and multiply the state by an i.i.d. loss fraction Y ~ G.  The
post-jump locations form the embedded chain

    Z_k = phi(Z_{k-1}, S_k) * Y_k,

with S_k i.i.d. Exponential(lambda) independent of the Y_k.  Once the
chain enters [0, 1] the flow is frozen and jumps only shrink, so the
sub-threshold set is never exited.
"""

import csv
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .densities import PowerDensity


def stream_rng(global_seed, *key):
    """Dedicated RNG stream for (global_seed, *key).

    The stream seed is a hash of the global seed together with the
    replicate/worker indices, so parallel and serial runs that assign
    the same keys draw identical variates.
    """
    return np.random.default_rng(np.random.SeedSequence([int(global_seed), *map(int, key)]))


def flow(x, t, r):
    """Deterministic flow phi(x, t); frozen at and below 1."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise ValueError("flow time must be >= 0")
    out = np.where(x > 1.0, (x - 1.0) * np.exp(r * t) + 1.0, x)
    return float(out) if out.ndim == 0 else out


def inverse_flow_time(x, y, r):
    """Time t with flow(x, t, r) = y, for x > 1 and y >= x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 1.0):
        raise ValueError("inverse flow needs x > 1")
    if np.any(y < x):
        raise ValueError("inverse flow needs y >= x")
    out = np.log((y - 1.0) / (x - 1.0)) / r
    return float(out) if out.ndim == 0 else out


def sample_interarrival(lam, rng, size=None):
    """Exponential(lam) waiting times via inverse CDF, -log(1-U)/lam."""
    u = rng.random(size)
    return -np.log1p(-u) / lam


def sample_loss_fraction(g, rng, size=None):
    """I.i.d. loss fractions from the density g (inverse-CDF sampling)."""
    return g.sample(rng, size)


@dataclass
class ModelParams:
    """Rates, loss-fraction density, and the rate-truncation bounds.

    lambda_lo/lambda_hi are the a-priori bounds used by the truncated
    MLE; the true rate must lie between them.
    """

    lam: float
    r: float
    g: object = field(default_factory=lambda: PowerDensity(10))
    lambda_lo: float = 0.5
    lambda_hi: float = 2.0

    def __post_init__(self):
        if self.lam <= 0 or self.r <= 0:
            raise ValueError("rates must be positive")
        if not 0 < self.lambda_lo <= self.lam <= self.lambda_hi:
            raise ValueError(
                f"need 0 < lambda_lo <= lam <= lambda_hi, got "
                f"[{self.lambda_lo}, {self.lam}, {self.lambda_hi}]"
            )


@dataclass
class ChainPath:
    """One realization of the embedded chain.

    s[k], y[k], z[k] are S_{k+1}, Y_{k+1}, Z_{k+1} (k 0-based);
    absorbed_at is the first 1-based jump index with z <= 1, or 0 when
    the start state is already inside [0, 1], or None if the path never
    entered [0, 1] before max_jumps (then truncated is True).
    """

    x0: float
    s: np.ndarray
    y: np.ndarray
    z: np.ndarray
    absorbed_at: Optional[int]
    truncated: bool

    def __len__(self):
        return len(self.z)

    def to_json(self):
        return json.dumps({
            "x0": self.x0,
            "s": self.s.tolist(),
            "y": self.y.tolist(),
            "z": self.z.tolist(),
            "absorbed_at": self.absorbed_at,
            "truncated": self.truncated,
        })

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(
            x0=float(d["x0"]),
            s=np.asarray(d["s"], dtype=float),
            y=np.asarray(d["y"], dtype=float),
            z=np.asarray(d["z"], dtype=float),
            absorbed_at=d["absorbed_at"],
            truncated=bool(d["truncated"]),
        )

    def write_csv(self, path):
        """Columns k, s_k, y_k, z_k; the k=0 row carries the start state.

        path is a file path or an open text file.
        """
        if hasattr(path, "write"):
            self._write_rows(path)
            return
        with open(path, "w", newline="", encoding="utf-8") as fh:
            self._write_rows(fh)

    def _write_rows(self, fh):
        w = csv.writer(fh)
        w.writerow(["k", "s_k", "y_k", "z_k"])
        w.writerow([0, "", "", repr(float(self.x0))])
        for k in range(len(self.z)):
            w.writerow([k + 1, repr(float(self.s[k])), repr(float(self.y[k])),
                        repr(float(self.z[k]))])

    @classmethod
    def read_csv(cls, path):
        if hasattr(path, "read"):
            rows = list(csv.reader(path))[1:]
        else:
            with open(path, newline="", encoding="utf-8") as fh:
                rows = list(csv.reader(fh))[1:]
        x0 = float(rows[0][3])
        body = rows[1:]
        s = np.array([float(r[1]) for r in body])
        y = np.array([float(r[2]) for r in body])
        z = np.array([float(r[3]) for r in body])
        absorbed_at = 0 if x0 <= 1.0 else None
        for k, zk in enumerate(z):
            if zk <= 1.0 and x0 > 1.0:
                absorbed_at = k + 1
                break
        truncated = absorbed_at is None
        return cls(x0=x0, s=s, y=y, z=z, absorbed_at=absorbed_at, truncated=truncated)


def simulate_chain(params, x0, max_jumps, rng):
    """Simulate the embedded chain from x0.

    Stops at the first jump index with Z_k <= 1 when x0 > 1, otherwise
    runs the full max_jumps (a start inside [0, 1] is absorbed at index
    0 and the chain keeps jumping there).
    """
    if x0 <= 0:
        raise ValueError("x0 must be positive")
    if max_jumps < 1:
        raise ValueError("max_jumps must be >= 1")
    s, y, z = [], [], []
    state = float(x0)
    absorbed_at = 0 if x0 <= 1.0 else None
    for k in range(1, max_jumps + 1):
        sk = float(sample_interarrival(params.lam, rng))
        yk = float(sample_loss_fraction(params.g, rng))
        state = flow(state, sk, params.r) * yk
        s.append(sk)
        y.append(yk)
        z.append(state)
        if state <= 1.0 and absorbed_at is None:
            absorbed_at = k
            break
    truncated = x0 > 1.0 and absorbed_at is None
    return ChainPath(
        x0=float(x0),
        s=np.array(s),
        y=np.array(y),
        z=np.array(z),
        absorbed_at=absorbed_at,
        truncated=truncated,
    )


@dataclass
class Trajectory:
    """Piecewise-deterministic path on [0, horizon].

    jump_times[k] is T_{k+1}; pre_jump[k] = phi evaluated just before
    the jump, post_jump[k] = pre_jump[k] * Y_{k+1}.  Between jumps the
    path follows the flow from the last post-jump state.
    """

    x0: float
    horizon: float
    r: float
    jump_times: np.ndarray
    pre_jump: np.ndarray
    post_jump: np.ndarray

    def state_at(self, t):
        """Path value at times t (right-continuous at jumps)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any((t < 0) | (t > self.horizon)):
            raise ValueError("times must lie in [0, horizon]")
        if len(self.jump_times) == 0:
            return flow(self.x0, t, self.r)
        idx = np.searchsorted(self.jump_times, t, side="right")
        start_x = np.where(idx == 0, self.x0, self.post_jump[np.maximum(idx - 1, 0)])
        start_t = np.where(idx == 0, 0.0, self.jump_times[np.maximum(idx - 1, 0)])
        return flow(start_x, t - start_t, self.r)

    def to_rows(self, points_per_segment=12):
        """(t, x) rows for plotting: dense flow samples plus both jump sides."""
        rows = []
        seg_start_t = 0.0
        seg_start_x = self.x0
        first = True
        for tk, pre, post in zip(self.jump_times, self.pre_jump, self.post_jump):
            ts = np.linspace(seg_start_t, tk, points_per_segment, endpoint=False)
            # the post-jump row below already covers each segment start
            for t in (ts if first else ts[1:]):
                rows.append((t, flow(seg_start_x, t - seg_start_t, self.r)))
            rows.append((tk, pre))
            rows.append((tk, post))
            seg_start_t, seg_start_x = tk, post
            first = False
        ts = np.linspace(seg_start_t, self.horizon, points_per_segment)
        for t in (ts if first else ts[1:]):
            rows.append((t, flow(seg_start_x, t - seg_start_t, self.r)))
        return rows


def simulate_trajectory(params, x0, horizon, rng):
    """Continuous-time skeleton over [0, horizon].

    Jumps keep arriving after the path enters [0, 1]; the flow there is
    frozen, so the path is constant between jumps and steps down at
    each jump.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if x0 <= 0:
        raise ValueError("x0 must be positive")
    jump_times, pre, post = [], [], []
    t = 0.0
    state = float(x0)
    while True:
        t += float(sample_interarrival(params.lam, rng))
        if t > horizon:
            break
        before = flow(state, t - (jump_times[-1] if jump_times else 0.0), params.r)
        after = before * float(sample_loss_fraction(params.g, rng))
        jump_times.append(t)
        pre.append(before)
        post.append(after)
        state = after
    return Trajectory(
        x0=float(x0),
        horizon=float(horizon),
        r=params.r,
        jump_times=np.array(jump_times),
        pre_jump=np.array(pre),
        post_jump=np.array(post),
    )
