"""Transition density of the embedded chain and its error bounds.

For x <= 1 the density of Z_1 given Z_0 = x is the closed form
(1/x) G(y/x).  For x > 1 it is

    R(x, y) = (lam/r) (x-1)^{lam/r} * B(x, y),
    B(x, y) = integral_0^{min(y/x, 1)} G(u) u^{lam/r} (y-u)^{-lam/r-1} du,

where the inner integrand is steep near the upper limit.  The change
of variable v = y - u maps that endpoint layer onto a v^{-a-1} profile
that log-graded panels resolve; see quadrature.graded_integral_batch.

The plug-in estimate uses the same code with (lambda_hat, G_hat): a
KernelSpec does not care whether its ingredients are exact or fitted.
"""

from dataclasses import dataclass, field

import numpy as np

from .densities import PowerDensity
from .quadrature import QuadratureError, adaptive_panels, graded_integral_batch

_UNIT_WEIGHT = PowerDensity(0)  # density 1 on [0,1]: the unweighted integral


@dataclass(eq=False)
class KernelSpec:
    """Rates and loss density defining one transition kernel.

    quad_tol is the relative tolerance of every quadrature performed
    for this kernel.  Scalar evaluations are memoized per (x, y); the
    Fredholm solver additionally caches its discretized operator here.
    """

    lam: float
    r: float
    g: object
    quad_tol: float = 1e-8
    _memo: dict = field(default_factory=dict, repr=False)
    op_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.lam <= 0 or self.r <= 0:
            raise ValueError("rates must be positive")
        if not 0 < self.quad_tol < 1:
            raise ValueError("quad_tol must be in (0, 1)")

    @property
    def a(self):
        return self.lam / self.r


def _raw_beta_batch(g, a, x, y, tol):
    """Vectorized B(x, y) with deduplication of repeated (y, limit) pairs."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if np.any(x < 1.0):
        raise ValueError("inner integral is defined for x >= 1")
    if np.any(y < 0.0):
        raise ValueError("inner integral is defined for y >= 0")
    out = np.zeros_like(y)

    sup_lo, sup_hi = getattr(g, "support", (0.0, 1.0))
    u_lo = max(0.0, sup_lo)
    with np.errstate(divide="ignore"):
        c = np.minimum(y / x, 1.0)
    u_hi = np.minimum(c, sup_hi)
    live = (y > 0.0) & (u_hi > u_lo)
    if not np.any(live):
        return out

    pairs = np.stack([y[live], u_hi[live]])
    uniq, inv = np.unique(pairs, axis=1, return_inverse=True)
    yu, uhi = uniq[0], uniq[1]
    v_lo = yu - uhi
    v_hi = yu - u_lo
    if np.any(v_lo <= 0.0):
        k = int(np.argmin(v_lo))
        raise QuadratureError(
            f"integrand is non-integrable at the upper limit for y={yu[k]:g} "
            f"(x on the boundary): y - u vanishes inside the range"
        )

    def f(v, idx):
        u = yu[idx][:, None] - v
        np.maximum(u, 0.0, out=u)
        w = np.asarray(g.pdf(u), dtype=float)
        if a == 1.0:
            w *= u
        else:
            w *= u**a
        w *= v ** (-a - 1.0)
        return w

    # a B error of delta means a density error of a (x-1)^a delta; errors
    # below 1e-14 on the density are beneath every downstream tolerance,
    # so give each entry that much absolute slack (max over the x that
    # share a deduplicated (y, u_hi) pair)
    pref = a * np.maximum(x[live] - 1.0, 1e-300) ** a
    pref_max = np.zeros(yu.size)
    np.maximum.at(pref_max, inv, pref)
    abs_tol = 1e-14 / np.maximum(pref_max, 1e-300)

    # u^a has a fractional-power corner at u = 0; when the weight's
    # support reaches down to 0 that endpoint (v = v_hi) needs its own
    # grading or the doubling stalls there
    two_sided = u_lo == 0.0 and abs(a - round(a)) > 1e-9
    vals = graded_integral_batch(f, v_lo, v_hi, tol, abs_tol=abs_tol,
                                 two_sided=two_sided)
    out[live] = vals[inv]
    return out


def beta_integral_batch(spec, x, y):
    """B(x, y) for arrays of states (broadcast together)."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    shape = x.shape
    flat = _raw_beta_batch(spec.g, spec.a, x, y, spec.quad_tol)
    return flat.reshape(shape)


def beta_integral(spec, x, y):
    """Inner integral B(x, y) of the transition density, memoized."""
    key = ("beta", float(x), float(y))
    hit = spec._memo.get(key)
    if hit is None:
        hit = float(beta_integral_batch(spec, x, y))
        spec._memo[key] = hit
    return hit


def transition_density_batch(spec, x, y):
    """R(x, y) for arrays of states (broadcast together)."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    shape = x.shape
    xf = np.atleast_1d(x).astype(float).ravel()
    yf = np.atleast_1d(y).astype(float).ravel()
    if np.any(xf <= 0.0):
        raise ValueError("transition density needs x > 0")
    if np.any(yf < 0.0):
        raise ValueError("transition density needs y >= 0")
    out = np.zeros_like(yf)
    low = xf <= 1.0
    if np.any(low):
        out[low] = np.asarray(spec.g.pdf(yf[low] / xf[low])) / xf[low]
    hi = ~low
    if np.any(hi):
        pref = (spec.lam / spec.r) * (xf[hi] - 1.0) ** spec.a
        out[hi] = pref * _raw_beta_batch(spec.g, spec.a, xf[hi], yf[hi], spec.quad_tol)
    if shape == ():
        return float(out[0])
    return out.reshape(shape)


def transition_density(spec, x, y):
    """Transition density R(x, y), memoized per (x, y)."""
    key = ("R", float(x), float(y))
    hit = spec._memo.get(key)
    if hit is None:
        hit = float(transition_density_batch(spec, x, y))
        spec._memo[key] = hit
    return hit


def f_lambda(lam, r, x, y, tol=1e-8):
    """alpha_lam(x) times the unweighted inner integral.

    This is the quantity the Lemma-2 style envelope controls: it never
    exceeds 1/lam.
    """
    if x < 1.0:
        raise ValueError("f_lambda is defined for x >= 1")
    a = lam / r
    alpha = (x - 1.0) ** a / r
    if alpha == 0.0:
        return 0.0
    raw = _raw_beta_batch(_UNIT_WEIGHT, a, np.array([x]), np.array([y]), tol)
    return float(alpha * raw[0])


def f_lambda_envelope(lam, r, x, y):
    """Closed-form envelope of f_lambda (tight middle bound, <= 1/lam)."""
    a = lam / r
    if y < x:
        return (1.0 - ((x - 1.0) / x) ** a) / lam
    return (((x - 1.0) / (y - 1.0)) ** a - ((x - 1.0) / y) ** a) / lam


def tail_mass_bound(x, y_max, lam, r):
    """Upper bound on the one-jump mass beyond y_max, from x > 1.

    The pre-jump state is Pareto-tailed and the jump only shrinks, so
    P(Z_1 > y_max | Z_0 = x) <= ((x-1)/(y_max-1))^{lam/r}.
    """
    if y_max <= x:
        raise ValueError("need y_max > x")
    if x <= 1.0:
        return 0.0
    return ((x - 1.0) / (y_max - 1.0)) ** (lam / r)


def sup_error_bound(sup_g_err, sup_g_hat, lambda_err, lambda_lo, lambda_hi):
    """Deterministic sup-norm bound on |R - R_hat| from estimation errors.

    sup_g_err = ||G - G_hat||_inf, sup_g_hat = ||G_hat||_inf,
    lambda_err = |lambda - lambda_hat|; lambda_lo/hi are the truncation
    bounds that the rate estimate respects.
    """
    if min(sup_g_err, sup_g_hat, lambda_err) < 0 or lambda_lo <= 0:
        raise ValueError("error ingredients must be nonnegative, lambda_lo > 0")
    c = (4.0 / np.e * lambda_hi / lambda_lo + 1.0) / lambda_lo
    return sup_g_err + c * sup_g_hat * lambda_err


def _graded_to(lo, hi, scale, n=14):
    """Edges from lo to hi with geometric clustering at hi (feature size scale)."""
    d = hi - lo
    if d <= 0:
        return np.array([lo, hi])
    steps = d * 2.0 ** -np.arange(1, n + 1)  # decreasing distances from hi
    steps = steps[steps > min(scale, d) * 1e-3]
    return np.concatenate(([lo], hi - steps, [hi]))


def _g_kink_fracs(g):
    """Loss fractions u where G is not smooth; R has kinks along y = x u."""
    lo, hi = getattr(g, "support", (0.0, 1.0))
    ks = {min(float(hi), 1.0)}
    if lo > 0.0:
        ks.add(float(lo))
    ks.update(float(b) for b in getattr(g, "breakpoints", ()))
    return tuple(sorted(k for k in ks if 0.0 < k <= 1.0))


def _with_kinks(edges, kinks):
    kinks = [k for k in kinks if edges[0] < k < edges[-1]]
    if not kinks:
        return np.asarray(edges, dtype=float)
    return np.unique(np.concatenate((edges, kinks)))


def row_mass(spec, x, y_hi):
    """integral of R(x, y) dy over [0, y_hi] by adaptive quadrature.

    Panel edges are clustered at y = 1 (where the integrand varies on
    the scale x - 1) and at the kink y = x.
    """
    if x <= 1.0:
        # closed-form branch: all mass sits in [0, x]
        lo, hi = getattr(spec.g, "support", (0.0, 1.0))
        u0, u1 = max(lo, 0.0), min(hi, y_hi / x, 1.0)
        if u1 <= u0:
            return 0.0
        edges = _with_kinks(x * np.linspace(u0, u1, 17),
                            [x * b for b in getattr(spec.g, "breakpoints", ())])

        def f_low(pts):
            return transition_density_batch(spec, np.full_like(pts, x), pts)

        return adaptive_panels(f_low, edges, spec.quad_tol)

    scale = x - 1.0
    pieces = [_graded_to(0.0, min(1.0, y_hi), scale)]
    if y_hi > 1.0:
        up = _graded_to(1.0, min(x, y_hi), scale)
        pieces.append(up)
    if y_hi > x:
        # log-uniform in y-1 from the kink outwards
        n = max(8, int(np.ceil(np.log2((y_hi - 1.0) / (x - 1.0)))) + 4)
        pieces.append(1.0 + np.geomspace(x - 1.0, y_hi - 1.0, n))
    edges = _with_kinks(np.concatenate(pieces),
                        [x * u for u in _g_kink_fracs(spec.g)])

    def f(pts):
        return transition_density_batch(spec, np.full_like(pts, x), pts)

    return adaptive_panels(f, edges, spec.quad_tol)


def column_mass(spec, y, x_hi, x_lo=1.0):
    """integral of R(x, y) dx over [x_lo, x_hi] by adaptive quadrature."""
    if not x_lo >= 1.0:
        raise ValueError("column integral starts at or above 1")
    lo = x_lo - 1.0 if x_lo > 1.0 else 1e-9 * (x_hi - 1.0)
    edges = 1.0 + np.geomspace(lo, x_hi - 1.0, 48)
    if x_lo > 1.0:
        edges = np.concatenate(([x_lo], edges[edges > x_lo]))
    else:
        # R(., y) extends continuously to x = 1 (value G(y)); keep that mass
        edges = np.concatenate(([1.0], edges))
    # R(., y) kinks where y/x crosses a non-smooth point of G
    kinks = [y] + [y / u for u in _g_kink_fracs(spec.g)]
    edges = _with_kinks(edges, kinks)

    def f(pts):
        return transition_density_batch(spec, pts, np.full_like(pts, y))

    return adaptive_panels(f, edges, spec.quad_tol)
