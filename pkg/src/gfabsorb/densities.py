"""Loss-fraction densities on [0, 1].

Every density object exposes the same small protocol, so analytic
densities, tabulated callables and fitted kernel-density estimates are
interchangeable wherever only evaluation is needed:

    pdf(u)                vectorized density evaluation
    sample(rng, size)     i.i.d. draws
    ppf(q)                inverse CDF
    inverse_u_moment(eps0) integral of pdf(u)/u over (eps0, 1]
    support               (lo, hi) outside of which pdf is 0
    breakpoints           interior points where pdf is not smooth
"""

import numpy as np
from scipy import integrate


class DivergentIntegralError(ValueError):
    """The u^{-1}-weighted integral diverges at 0.

    Carries the value truncated at ``eps0`` so callers can still report
    a finite diagnostic.
    """

    def __init__(self, message, truncated_value=None, eps0=None):
        super().__init__(message)
        self.truncated_value = truncated_value
        self.eps0 = eps0


# fallback truncation used when reporting a divergent weighted integral
EPS0_DEFAULT = 1e-6


def log_weighted_integral(pdf, lo, hi):
    """Integral of pdf(u)/u on [lo, hi] computed in log space.

    Substituting u = e^t turns the 1/u weight into a flat measure, which
    keeps adaptive quadrature honest when lo is many decades below hi.
    """
    if not 0.0 < lo < hi:
        raise ValueError(f"need 0 < lo < hi, got [{lo}, {hi}]")
    val, _ = integrate.quad(lambda t: pdf(np.exp(t)), np.log(lo), np.log(hi), limit=200)
    return val


class PowerDensity:
    """Density (k+1) u^k on [0, 1], k >= 0.

    The workhorse of the reference experiment is k = 10, i.e. 11 u^10.
    """

    def __init__(self, k):
        if k < 0:
            raise ValueError(f"exponent must be >= 0, got {k}")
        self.k = float(k)
        self.support = (0.0, 1.0)
        self.breakpoints = ()

    def __repr__(self):
        return f"PowerDensity(k={self.k:g})"

    def pdf(self, u):
        u = np.asarray(u, dtype=float)
        scalar = u.ndim == 0
        u = np.atleast_1d(u)
        inside = (u >= 0.0) & (u <= 1.0)
        out = np.zeros_like(u)
        # where= guard keeps fractional powers off negative arguments
        np.power(u, self.k, out=out, where=inside)
        out *= self.k + 1.0
        return float(out[0]) if scalar else out

    def cdf(self, u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        out = u ** (self.k + 1.0)
        return out if out.ndim else float(out)

    def ppf(self, q):
        q = np.asarray(q, dtype=float)
        if np.any((q < 0.0) | (q > 1.0)):
            raise ValueError("quantile levels must lie in [0, 1]")
        out = q ** (1.0 / (self.k + 1.0))
        return out if out.ndim else float(out)

    def sample(self, rng, size=None):
        return self.ppf(rng.random(size))

    def mean(self):
        return (self.k + 1.0) / (self.k + 2.0)

    def inverse_u_moment(self, eps0=0.0):
        """Integral of pdf(u)/u over (eps0, 1], exact for this family."""
        k = self.k
        if eps0 >= 1.0:
            return 0.0
        if k > 0.0:
            return (k + 1.0) / k * (1.0 - eps0**k)
        # uniform case: log divergence at 0
        if eps0 > 0.0:
            return -np.log(eps0)
        raise DivergentIntegralError(
            "inverse-u moment of the uniform density diverges at 0",
            truncated_value=-np.log(EPS0_DEFAULT),
            eps0=EPS0_DEFAULT,
        )


class TabulatedDensity:
    """Density given by a callable, sampled through a cached CDF table.

    The inverse CDF is computed by bisection on a table of
    ``table_size`` nodes distributed over the support, with breakpoints
    pinned to table nodes so discontinuities cost no accuracy.
    """

    def __init__(self, fn, support=(0.0, 1.0), breakpoints=(), table_size=4096,
                 mass_tol=1e-5):
        lo, hi = float(support[0]), float(support[1])
        if not lo < hi:
            raise ValueError(f"empty support {support}")
        self.fn = fn
        self.support = (lo, hi)
        self.breakpoints = tuple(sorted(float(b) for b in breakpoints))
        if any(not lo < b < hi for b in self.breakpoints):
            raise ValueError("breakpoints must lie strictly inside the support")

        edges = np.array([lo, *self.breakpoints, hi])
        per_seg = np.maximum(np.diff(edges) / (hi - lo) * table_size, 8).astype(int)
        pieces = [np.linspace(edges[i], edges[i + 1], per_seg[i] + 1) for i in range(len(per_seg))]
        nodes = np.unique(np.concatenate(pieces))
        vals = np.asarray(fn(nodes), dtype=float)
        if np.any(vals < -1e-12) or not np.all(np.isfinite(vals)):
            raise ValueError("density evaluator must be finite and nonnegative on its support")
        cdf = np.concatenate(([0.0], integrate.cumulative_trapezoid(vals, nodes)))
        if abs(cdf[-1] - 1.0) > mass_tol:
            raise ValueError(f"density mass {cdf[-1]:.6g} is not 1 within {mass_tol:g}")
        self._nodes = nodes
        self._cdf = cdf / cdf[-1]

    def pdf(self, u):
        u = np.asarray(u, dtype=float)
        scalar = u.ndim == 0
        u = np.atleast_1d(u)
        lo, hi = self.support
        inside = (u >= lo) & (u <= hi)
        out = np.zeros_like(u)
        if np.any(inside):
            out[inside] = self.fn(u[inside])
        return float(out[0]) if scalar else out

    def cdf(self, u):
        u = np.asarray(u, dtype=float)
        out = np.interp(u, self._nodes, self._cdf, left=0.0, right=1.0)
        return out if out.ndim else float(out)

    def ppf(self, q):
        q = np.asarray(q, dtype=float)
        if np.any((q < 0.0) | (q > 1.0)):
            raise ValueError("quantile levels must lie in [0, 1]")
        # bisection on the cached table, then linear within the bracket
        idx = np.searchsorted(self._cdf, q, side="left")
        idx = np.clip(idx, 1, len(self._cdf) - 1)
        c0, c1 = self._cdf[idx - 1], self._cdf[idx]
        x0, x1 = self._nodes[idx - 1], self._nodes[idx]
        denom = np.where(c1 > c0, c1 - c0, 1.0)
        frac = np.clip((q - c0) / denom, 0.0, 1.0)
        out = x0 + frac * (x1 - x0)
        return out if out.ndim else float(out)

    def sample(self, rng, size=None):
        return self.ppf(rng.random(size))

    def inverse_u_moment(self, eps0=0.0):
        lo = max(self.support[0], eps0)
        hi = min(self.support[1], 1.0)
        if lo >= hi:
            return 0.0
        if lo > 0.0:
            total = 0.0
            edges = [lo] + [b for b in self.breakpoints if lo < b < hi] + [hi]
            for a, b in zip(edges[:-1], edges[1:]):
                total += log_weighted_integral(self.pdf, a, b)
            return total
        # support touches 0: probe a shrinking cutoff and require Cauchy behavior
        probes = [1e-6, 1e-8, 1e-10]
        vals = [self.inverse_u_moment(eps) for eps in probes]
        if abs(vals[2] - vals[1]) < 1e-8 + 1e-6 * abs(vals[2]):
            return vals[2]
        raise DivergentIntegralError(
            "inverse-u moment appears divergent at 0",
            truncated_value=vals[0],
            eps0=probes[0],
        )
