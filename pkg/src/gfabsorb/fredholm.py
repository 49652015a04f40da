"""Absorption probability and hitting times via Neumann partial sums.

The absorption probability p of the embedded chain solves the second
kind Fredholm equation p = s + Kp on (1, infinity), where

    s(x) = integral_0^1 R(x, y) dy          (one-jump absorption)
    (Kh)(x) = integral_1^infty h(y) R(x, y) dy.

The operator has L1 norm kappa = (lam/(lam+r)) integral_0^1 G(u)/u du,
so when kappa < 1 the partial sums p_m = sum_{k<=m} K^k s converge
geometrically, with tail ||p - p_m|| <= ||s|| kappa^{m+1} / (1-kappa).
The distribution of the absorption jump index comes from the same
terms: t_1 = s and t_m = K t_{m-1}.

Discretization is Nystrom-with-interpolation on a log-spaced grid over
[1 + node_eps, X_max] (geometric in x - 1, so the nodes crowd the
boundary where s varies fastest), with piecewise-linear interpolation
and extension by zero beyond X_max.  Each operator column is then
rescaled so its weighted sum matches the exact truncated column mass,
which is available in closed form up to one inner integral; this keeps
the discrete operator's L1 norm below kappa by construction instead of
trusting the trapezoid error to stay signed.
"""

import json
from dataclasses import dataclass

import numpy as np

from .densities import EPS0_DEFAULT, DivergentIntegralError
from .kernel import tail_mass_bound, transition_density_batch, _raw_beta_batch
from .quadrature import graded_integral_batch

DEFAULT_GRID_SIZE = 400
DEFAULT_NODE_EPS = 1e-6
DEFAULT_X_MAX = 1e3


class ContractionError(RuntimeError):
    """The Neumann series is refused because kappa >= 1.

    Geometric convergence of the partial sums requires the operator
    norm bound kappa = (lam/(lam+r)) integral G(u)/u du to be < 1.
    """

    def __init__(self, message, kappa=None):
        super().__init__(message)
        self.kappa = kappa


def default_grid(grid_size=DEFAULT_GRID_SIZE, node_eps=DEFAULT_NODE_EPS,
                 x_max=DEFAULT_X_MAX):
    """Nodes 1 + geomspace(node_eps, x_max - 1): log-spaced, refined near 1."""
    if grid_size < 2 or node_eps <= 0 or x_max <= 1.0 + node_eps:
        raise ValueError("need grid_size >= 2 and 0 < node_eps < x_max - 1")
    return 1.0 + np.geomspace(node_eps, x_max - 1.0, grid_size)


@dataclass(frozen=True)
class GridFunction:
    """Piecewise-linear function on [nodes[0], nodes[-1]], zero beyond.

    Below the first node the boundary value is continued (the grid
    starts at 1 + node_eps, just off the absorbing boundary).
    """

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if nodes.ndim != 1 or nodes.shape != values.shape or nodes.size < 2:
            raise ValueError("nodes and values must be matching 1-d arrays")
        if np.any(np.diff(nodes) <= 0.0):
            raise ValueError("nodes must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.nodes, self.values, left=self.values[0], right=0.0)
        return float(out) if x.ndim == 0 else out

    def norm_l1(self):
        return float(np.trapezoid(np.abs(self.values), self.nodes))

    def resample(self, nodes):
        return GridFunction(nodes, self(np.asarray(nodes, dtype=float)))


@dataclass(frozen=True)
class SolverReport:
    """Everything the Neumann solve promises about its own accuracy."""

    m: int
    kappa: float
    s_norm: float
    tail_bound: float
    truncation_diag: float
    quad_tol: float

    def to_json(self):
        return json.dumps(self.__dict__)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(m=int(d["m"]), kappa=d["kappa"], s_norm=d["s_norm"],
                   tail_bound=d["tail_bound"], truncation_diag=d["truncation_diag"],
                   quad_tol=d["quad_tol"])


def contraction_bound(spec, eps0=EPS0_DEFAULT):
    """kappa = (lam/(lam+r)) integral_0^1 G(u)/u du.

    When the weighted integral diverges at 0 (every Gaussian KDE does),
    the eps0-truncated value is used instead; the resulting kappa is
    then itself only a truncated diagnostic, and it is exactly the
    quantity whose size decides whether the solver may proceed.
    """
    try:
        mom = spec.g.inverse_u_moment(0.0)
    except DivergentIntegralError as err:
        if eps0 == err.eps0 and err.truncated_value is not None:
            mom = err.truncated_value
        else:
            mom = spec.g.inverse_u_moment(eps0)
    return spec.lam / (spec.lam + spec.r) * mom


def _source_batch(spec, xs):
    """s at each x > 1 via the flow form s(x) = E[G(1/Phi(x, S))].

    Written along the deterministic flow this is the 1-d integral
    a (x-1)^a integral_x^inf (w-1)^(-a-1) G(1/w) dw with a = lam/r,
    which costs one CDF sweep instead of a 2-d density quadrature.
    The integrand vanishes once 1/w drops below the support of G, and
    beyond W = 1 + (x-1) (10/tol)^(1/a) the remaining tail is under
    tol/10 of the total, so the upper limit is finite in all cases.
    """
    a = spec.a
    g = spec.g
    v_lo = xs - 1.0
    ratio = min((10.0 / spec.quad_tol) ** (1.0 / a), 1e15)
    v_hi = v_lo * ratio
    sup_lo = getattr(g, "support", (0.0, 1.0))[0]
    if sup_lo > 0.0:
        # G(1/w) = 0 for w above 1/sup_lo: hard cutoff
        v_hi = np.minimum(v_hi, 1.0 / sup_lo - 1.0)
    out = np.zeros_like(xs)
    live = v_hi > v_lo
    if np.any(live):

        def f(v, idx):
            return v ** (-a - 1.0) * g.cdf(1.0 / (1.0 + v))

        # absolute floor: an s error below 1e-14 is beneath every tolerance
        abs_tol = 1e-14 / np.maximum(a * v_lo[live] ** a, 1e-300)
        vals = graded_integral_batch(f, v_lo[live], v_hi[live], spec.quad_tol,
                                     abs_tol=abs_tol)
        out[live] = a * v_lo[live] ** a * vals
    return out


def source_at(spec, x):
    """Pointwise s(x) = integral_0^1 R(x, y) dy, any x > 0."""
    if x <= 0.0:
        raise ValueError("need x > 0")
    if x <= 1.0:
        # the one-jump mass from inside [0,1] never leaves it
        return float(spec.g.cdf(1.0 / x))
    return float(_source_batch(spec, np.array([x]))[0])


def source_s(spec, grid):
    """One-jump absorption probability s on the grid, as a GridFunction."""
    nodes = np.asarray(grid, dtype=float)
    key = ("s", nodes.tobytes())
    hit = spec.op_cache.get(key)
    if hit is None:
        if nodes[0] <= 1.0:
            raise ValueError("solver nodes must lie in (1, X_max]")
        hit = _source_batch(spec, nodes)
        spec.op_cache[key] = hit
    return GridFunction(nodes, hit.copy())


def _kink_ratios(g):
    """u-values where G is not smooth, as ratios y/x of induced R kinks."""
    lo, hi = getattr(g, "support", (0.0, 1.0))
    marks = [b for b in getattr(g, "breakpoints", ()) if lo < b < hi]
    if lo > 0.0:
        marks.append(lo)
    if hi < 1.0:
        marks.append(hi)
    return sorted(marks)


def _row_points(nodes, i, ratios, split=8):
    """Quadrature points for row i: the grid plus refined panels.

    Refines around the diagonal kink y = nodes[i] and around each
    G-induced kink y = nodes[i] * ratio.
    """
    P = nodes.size
    extra = []
    hot = {j for j in range(i - 2, i + 2)}
    for rho in ratios:
        yk = nodes[i] * rho
        if nodes[0] < yk < nodes[-1]:
            j = int(np.searchsorted(nodes, yk)) - 1
            hot.update((j - 1, j, j + 1))
            extra.append(np.array([yk]))
    for j in hot:
        if 0 <= j < P - 1:
            extra.append(np.linspace(nodes[j], nodes[j + 1], split + 1)[1:-1])
    if extra:
        return np.unique(np.concatenate([nodes, *extra]))
    return nodes


def _trapz_weights(pts):
    w = np.empty_like(pts)
    w[0] = 0.5 * (pts[1] - pts[0])
    w[-1] = 0.5 * (pts[-1] - pts[-2])
    w[1:-1] = 0.5 * (pts[2:] - pts[:-2])
    return w


def _exact_column_masses(spec, nodes):
    """integral over [nodes[0], X_max] of R(x, y) dx at each node y.

    Swapping the order of integration in the column integral reduces it
    to closed form up to one inner integral:

        c(y; [1,X]) = (lam/(lam+r)) [ W(y/X) + (X-1)^{a+1} B(X, y) ]

    with W(t) = integral_t^1 G(u)/u du, and the truncation at the lower
    end subtracts the same expression for X = nodes[0].  This is the
    second, independent route to the column mass (the first being
    direct quadrature in x), and it is exact for y >= nodes[0].
    """
    lam, r, g, a = spec.lam, spec.r, spec.g, spec.a
    X = float(nodes[-1])
    eps = float(nodes[0]) - 1.0
    b_top = _raw_beta_batch(g, a, np.full_like(nodes, X), nodes, spec.quad_tol)
    b_bot = _raw_beta_batch(g, a, np.full_like(nodes, nodes[0]), nodes, spec.quad_tol)
    w_mom = np.array([g.inverse_u_moment(min(1.0, y / X)) for y in nodes])
    pref = lam / (lam + r)
    return pref * (w_mom + (X - 1.0) ** (a + 1.0) * b_top - eps ** (a + 1.0) * b_bot)


def _operator_matrix(spec, nodes, calibrate=True):
    """Dense Nystrom matrix A with (Kh)(nodes) = A @ h(nodes)."""
    key = ("K", nodes.tobytes(), bool(calibrate))
    hit = spec.op_cache.get(key)
    if hit is not None:
        return hit

    P = nodes.size
    ratios = _kink_ratios(spec.g)
    rows = [_row_points(nodes, i, ratios) for i in range(P)]
    flat_y = np.concatenate(rows)
    flat_x = np.concatenate([np.full(r.size, nodes[i]) for i, r in enumerate(rows)])
    flat_R = transition_density_batch(spec, flat_x, flat_y)

    A = np.zeros((P, P))
    pos = 0
    for i, pts in enumerate(rows):
        vals = flat_R[pos:pos + pts.size]
        pos += pts.size
        wq = _trapz_weights(pts) * vals
        j = np.clip(np.searchsorted(nodes, pts, side="right") - 1, 0, P - 2)
        theta = (pts - nodes[j]) / (nodes[j + 1] - nodes[j])
        np.add.at(A[i], j, wq * (1.0 - theta))
        np.add.at(A[i], j + 1, wq * theta)

    if calibrate:
        w = _trapz_weights(nodes)
        target = _exact_column_masses(spec, nodes) * w
        colsum = w @ A
        scale = np.where(colsum > 0.0, target / np.where(colsum > 0.0, colsum, 1.0), 1.0)
        A *= scale[None, :]

    spec.op_cache[key] = A
    return A


def apply_K(spec, h, calibrate=True):
    """(Kh)(x) = integral_1^X_max h(y) R(x, y) dy on h's own grid."""
    A = _operator_matrix(spec, h.nodes, calibrate)
    return GridFunction(h.nodes, A @ h.values)


def _neumann_terms(spec, nodes, count, calibrate=True):
    """The arrays [s, Ks, K^2 s, ...], cached and grown on demand.

    Both the partial sums and the hitting-time probabilities are read
    off this single list, which is what makes p_m = sum t_k an exact
    arithmetic identity rather than a numerical coincidence.
    """
    key = ("terms", nodes.tobytes(), bool(calibrate))
    terms = spec.op_cache.get(key)
    if terms is None:
        terms = [source_s(spec, nodes).values]
        spec.op_cache[key] = terms
    if len(terms) < count:
        A = _operator_matrix(spec, nodes, calibrate)
        while len(terms) < count:
            terms.append(A @ terms[-1])
    return terms[:count]


def neumann_solve(spec, grid=None, m=10, x_eval=(1.1,), eps0=EPS0_DEFAULT,
                  calibrate=True):
    """Partial sum p_m = sum_{k=0}^m K^k s and its accuracy report.

    Refuses to sum when the contraction bound is >= 1, since the series
    then carries no convergence guarantee.  truncation_diag reports the
    mass the domain cutoff X_max can misplace per operator application,
    at the evaluation points of interest (at the far nodes themselves
    the cutoff bound is vacuous).
    """
    nodes = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if m < 0:
        raise ValueError("need m >= 0")
    kappa = contraction_bound(spec, eps0)
    if kappa >= 1.0:
        raise ContractionError(
            f"contraction bound kappa = {kappa:.6g} >= 1: the Neumann series "
            "has no geometric convergence guarantee; the solvability "
            "condition (lam/(lam+r)) integral G(u)/u du < 1 fails",
            kappa=kappa,
        )
    terms = _neumann_terms(spec, nodes, m + 1, calibrate)
    p = terms[0].copy()
    for t in terms[1:]:
        p += t
    s_norm = float(np.trapezoid(np.abs(terms[0]), nodes))
    tail = s_norm * kappa ** (m + 1) / (1.0 - kappa)
    x_eval = [float(v) for v in np.atleast_1d(x_eval)]
    trunc = max(tail_mass_bound(v, nodes[-1], spec.lam, spec.r) for v in x_eval)
    report = SolverReport(m=m, kappa=kappa, s_norm=s_norm, tail_bound=tail,
                          truncation_diag=trunc, quad_tol=spec.quad_tol)
    return GridFunction(nodes, p), report


def hitting_time_probs(spec, grid=None, m_max=6, calibrate=True):
    """t_1 = s, t_m = K t_{m-1}: absorption-at-jump-m probabilities."""
    nodes = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if m_max < 1:
        raise ValueError("need m_max >= 1")
    terms = _neumann_terms(spec, nodes, m_max, calibrate)
    return [GridFunction(nodes, t) for t in terms]


def l1_distance(f, g):
    """Trapezoid integral of |f - g| on f's grid (g resampled if needed)."""
    gv = g.values if np.array_equal(f.nodes, g.nodes) else g(f.nodes)
    return float(np.trapezoid(np.abs(f.values - gv), f.nodes))


def ise(f, g):
    """Trapezoid integral of (f - g)^2 on f's grid (g resampled if needed)."""
    gv = g.values if np.array_equal(f.nodes, g.nodes) else g(f.nodes)
    return float(np.trapezoid((f.values - gv) ** 2, f.nodes))
