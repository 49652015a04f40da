"""Adaptive composite Gauss-Legendre quadrature.

Two flavors are used throughout the package:

* ``graded_integral_batch`` handles the near-singular inner integrals
  of the transition density.  After the substitution v = y - u the
  integrand behaves like v^{-a-1}, so panels are laid out
  log-uniformly in v (geometric grading into the steep endpoint) and
  the panel count is doubled until the value stabilizes.
* ``adaptive_panels`` integrates a smooth-except-at-known-points
  function over explicit initial panel edges, again with global
  doubling.

Both report non-convergence instead of silently returning.
"""

import numpy as np

_GL_ORDER = 12
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_ORDER)

# cap on points per doubling round across a whole batch slab
_SLAB = 4_000_000


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance.

    Carries the last estimate and the last observed change so callers
    can report how far the computation got.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


def _gl_panels(edges):
    """Gauss-Legendre points and weights for panel edges (..., P+1)."""
    lo = edges[..., :-1]
    hi = edges[..., 1:]
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    pts = mid[..., None] + half[..., None] * _GL_X
    wts = half[..., None] * _GL_W
    return pts, wts


# depth of the grading into the v_hi endpoint in two-sided mode: the
# last panel touching v_hi spans this fraction of the half-range, so an
# integrable corner there contributes O(_W_FLOOR) relative mass and the
# fixed Gauss error on that sliver is far below every tolerance in use
_W_FLOOR = 1e-12


def _log_edges(v_lo, v_hi, panels, two_sided=False):
    """Log-uniform panel edges between per-entry bounds (vectorized).

    One-sided grading clusters panels at v_lo only.  Two-sided grading
    splits the range at its midpoint and grades geometrically into both
    endpoints, for integrands with an additional corner at v_hi.
    """
    if not two_sided:
        t = np.linspace(0.0, 1.0, panels + 1)
        return v_lo[:, None] * (v_hi / v_lo)[:, None] ** t[None, :]
    p1 = panels // 2
    p2 = panels - p1
    mid = 0.5 * (v_lo + v_hi)
    t = np.linspace(0.0, 1.0, p1 + 1)
    left = v_lo[:, None] * (mid / v_lo)[:, None] ** t[None, :]
    s = np.linspace(0.0, 1.0, p2 + 1)[1:]
    half = 0.5 * (v_hi - v_lo)
    right = v_hi[:, None] - half[:, None] * _W_FLOOR ** s[None, :]
    return np.concatenate([left, right, v_hi[:, None]], axis=1)


def graded_integral_batch(f, v_lo, v_hi, tol, max_rounds=10, min_panels=4,
                          abs_tol=0.0, two_sided=False):
    """integral of f(v) dv on [v_lo[i], v_hi[i]] for each entry i.

    f maps an array of v values (2-d, entries x points) plus the entry
    index array to integrand values of the same shape; panels are
    log-uniform in v, doubled globally per entry until the relative
    change drops below tol.  abs_tol (scalar or per-entry) adds an
    absolute floor to the convergence test; callers set it to whatever
    error is provably negligible downstream, which keeps the doubling
    from chasing relative precision on vanishing tail values.
    two_sided additionally grades panels into v_hi, for integrands with
    an integrable corner at that endpoint as well.
    """
    v_lo = np.asarray(v_lo, dtype=float)
    v_hi = np.asarray(v_hi, dtype=float)
    n = v_lo.size
    out = np.zeros(n)
    if n == 0:
        return out
    if np.any(v_lo <= 0.0) or np.any(v_hi < v_lo):
        raise QuadratureError("graded quadrature needs 0 < v_lo <= v_hi")
    abs_tol = np.broadcast_to(np.asarray(abs_tol, dtype=float), (n,))

    ratio = v_hi / v_lo
    base = np.maximum(np.ceil(np.log2(np.maximum(ratio, 1.0 + 1e-15))).astype(int), 1)
    base = np.maximum(base, 2 * min_panels if two_sided else min_panels)

    todo = np.arange(n)
    prev = np.full(n, np.nan)
    panels = base.copy()
    for _ in range(max_rounds + 1):
        # group active entries by panel count so each group is rectangular
        for p in np.unique(panels[todo]):
            idx = todo[panels[todo] == p]
            step = max(1, _SLAB // (int(p) * _GL_ORDER))
            for start in range(0, idx.size, step):
                sl = idx[start:start + step]
                edges = _log_edges(v_lo[sl], v_hi[sl], int(p), two_sided)
                pts, wts = _gl_panels(edges)
                shape = pts.shape
                vals = f(pts.reshape(sl.size, -1), sl).reshape(shape)
                out[sl] = np.einsum("ijk,ijk->i", vals, wts)
        delta = np.abs(out[todo] - prev[todo])
        done = (delta <= tol * np.abs(out[todo]) + abs_tol[todo] + 1e-300) \
            & ~np.isnan(prev[todo])
        prev[todo] = out[todo]
        todo = todo[~done]
        if todo.size == 0:
            return out
        panels[todo] *= 2
    worst = int(todo[0])
    raise QuadratureError(
        f"inner quadrature did not converge to rel. tol {tol:g} "
        f"({todo.size} of {n} entries, e.g. entry {worst})",
        estimate=out[worst],
        error=float(np.abs(out[worst] - prev[worst])) if not np.isnan(prev[worst]) else None,
    )


def _split_edges(edges):
    """Insert the midpoint of every panel (keeps grading, doubles count)."""
    mids = 0.5 * (edges[:-1] + edges[1:])
    out = np.empty(edges.size + mids.size)
    out[0::2] = edges
    out[1::2] = mids
    return out


def adaptive_panels(f, edges, tol, max_rounds=12):
    """integral of f over [edges[0], edges[-1]] with edges as initial panels.

    f maps a 1-d array of points to values.  Every round splits every
    panel in half; convergence is relative change below tol.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) < 0):
        raise ValueError("edges must be a nondecreasing 1-d array")
    edges = np.unique(edges)
    prev = None
    for _ in range(max_rounds + 1):
        pts, wts = _gl_panels(edges[None, :])
        vals = f(pts.reshape(-1))
        cur = float(np.dot(vals.reshape(-1), wts.reshape(-1)))
        if prev is not None and abs(cur - prev) <= tol * abs(cur) + 1e-300:
            return cur
        prev = cur
        edges = _split_edges(edges)
    raise QuadratureError(
        f"panel quadrature did not converge to rel. tol {tol:g}",
        estimate=prev,
        error=abs(cur - prev),
    )


def adaptive_panels_batch(f, edges, tol, max_rounds=12):
    """Like adaptive_panels but for a batch sharing one edge layout.

    f maps (points 1-d, entry indices) to a (entries, points) array;
    each entry converges independently, rounds split all panels.
    """
    edges = np.unique(np.asarray(edges, dtype=float))
    n = None
    prev = None
    todo = None
    out = None
    for _ in range(max_rounds + 1):
        pts, wts = _gl_panels(edges[None, :])
        flat_pts = pts.reshape(-1)
        flat_wts = wts.reshape(-1)
        if out is None:
            vals = f(flat_pts, None)
            n = vals.shape[0]
            out = vals @ flat_wts
            prev = out.copy()
            todo = np.arange(n)
        else:
            vals = f(flat_pts, todo)
            cur = vals @ flat_wts
            delta = np.abs(cur - prev[todo])
            out[todo] = cur
            done = delta <= tol * np.abs(cur) + 1e-300
            prev[todo] = cur
            todo = todo[~done]
            if todo.size == 0:
                return out
        edges = _split_edges(edges)
    raise QuadratureError(
        f"batch panel quadrature did not converge to rel. tol {tol:g} "
        f"({todo.size} of {n} entries remain)",
        estimate=None if out is None else out[todo[0]],
    )
