"""Neumann solver: contraction bound, source term, operator, identities.

The source term for G uniform on [0, 1] with lam = r has the closed
form s(x) = 1 - (x - 1) ln(x/(x - 1)), frozen here as the oracle for
the quadrature route.
"""

import numpy as np
import pytest

from gfabsorb import (
    ContractionError,
    GridFunction,
    KernelSpec,
    PowerDensity,
    SolverReport,
    apply_K,
    contraction_bound,
    default_grid,
    hitting_time_probs,
    ise,
    l1_distance,
    neumann_solve,
    row_mass,
    source_at,
    source_s,
    tail_mass_bound,
)
from gfabsorb.model import stream_rng


@pytest.fixture(scope="module")
def grid200():
    return default_grid(grid_size=200, x_max=1000.0)


class TestContractionBound:
    def test_reference_model_exact(self, power_spec):
        # (lam/(lam+r)) * (k+1)/k = 0.5 * 1.1
        np.testing.assert_allclose(contraction_bound(power_spec), 0.55, atol=1e-12)

    def test_vanishes_with_lambda(self, power_g):
        spec = KernelSpec(1e-9, 1.0, power_g)
        assert contraction_bound(spec) <= 2e-9

    def test_uniform_half_closed_form(self, uniform_half_spec):
        np.testing.assert_allclose(
            contraction_bound(uniform_half_spec), np.log(2.0), rtol=1e-9
        )

    def test_supercritical_raises_in_solver(self, power_g):
        spec = KernelSpec(20.0, 1.0, power_g)
        kappa = contraction_bound(spec)
        assert kappa >= 1.0
        with pytest.raises(ContractionError) as err:
            neumann_solve(spec, default_grid(grid_size=16, x_max=50.0))
        np.testing.assert_allclose(err.value.kappa, kappa, rtol=1e-12)


class TestGrid:
    def test_default_grid_shape(self):
        nodes = default_grid(grid_size=50, node_eps=1e-6, x_max=100.0)
        assert nodes.shape == (50,)
        np.testing.assert_allclose(nodes[0], 1.0 + 1e-6, rtol=1e-12)
        np.testing.assert_allclose(nodes[-1], 100.0, rtol=1e-12)
        assert np.all(np.diff(nodes) > 0.0)

    def test_default_grid_validation(self):
        with pytest.raises(ValueError):
            default_grid(grid_size=1)
        with pytest.raises(ValueError):
            default_grid(node_eps=0.0)
        with pytest.raises(ValueError):
            default_grid(x_max=1.0)

    def test_grid_function_interpolation(self):
        f = GridFunction(np.array([1.0, 2.0, 3.0]), np.array([0.0, 1.0, 0.0]))
        assert f(1.5) == 0.5
        assert f(0.5) == 0.0  # continued boundary value
        assert f(4.0) == 0.0  # zero beyond the grid
        np.testing.assert_allclose(f.norm_l1(), 1.0, rtol=1e-14)

    def test_grid_function_validation(self):
        with pytest.raises(ValueError):
            GridFunction(np.array([1.0, 1.0]), np.array([0.0, 0.0]))
        with pytest.raises(ValueError):
            GridFunction(np.array([1.0, 2.0]), np.array([0.0, np.nan]))

    def test_resample_round_trip(self):
        f = GridFunction(np.array([1.0, 2.0, 4.0]), np.array([2.0, 3.0, 1.0]))
        fine = f.resample(np.linspace(1.0, 4.0, 31))
        np.testing.assert_allclose(fine(2.5), f(2.5), rtol=1e-14)


class TestSource:
    def test_inside_absorbing_set(self, power_spec):
        assert source_at(power_spec, 0.5) == 1.0
        assert source_at(power_spec, 1.0) == 1.0
        with pytest.raises(ValueError):
            source_at(power_spec, 0.0)

    def test_decreasing_in_x(self, power_spec):
        s = [source_at(power_spec, x) for x in (1.1, 2.0, 10.0, 100.0)]
        assert all(a > b for a, b in zip(s, s[1:]))
        assert s[-1] > 0.0

    def test_uniform01_closed_form(self, uniform01_spec):
        for x in (1.2, 1.5, 2.0, 5.0, 20.0):
            exact = 1.0 - (x - 1.0) * np.log(x / (x - 1.0))
            np.testing.assert_allclose(source_at(uniform01_spec, x), exact, rtol=1e-8)

    def test_flow_form_matches_kernel_row(self, power_spec):
        # dual route: 1-d flow-form integral vs integral_0^1 R(x, y) dy
        for x in (1.3, 2.0, 6.0):
            np.testing.assert_allclose(
                source_at(power_spec, x), row_mass(power_spec, x, 1.0), rtol=1e-7
            )

    def test_source_s_requires_interior_nodes(self, power_spec):
        with pytest.raises(ValueError):
            source_s(power_spec, np.array([1.0, 2.0]))

    def test_source_s_matches_pointwise(self, power_spec, grid200):
        s = source_s(power_spec, grid200)
        np.testing.assert_allclose(
            s.values[::40],
            [source_at(power_spec, x) for x in grid200[::40]],
            rtol=1e-10,
        )


class TestOperator:
    def test_zero_function_maps_to_zero(self, power_spec, grid200):
        h = GridFunction(grid200, np.zeros_like(grid200))
        out = apply_K(power_spec, h)
        assert np.all(out.values == 0.0)

    def test_constant_function_row_identity(self, power_spec, grid200):
        # for h = 1: (Kh)(x) + s(x) + tail(x) = 1, the row-mass identity.
        # column calibration makes column masses exact; row sums keep the
        # trapezoid discretization error, measured at ~3.3e-3 on 200 nodes
        h = GridFunction(grid200, np.ones_like(grid200))
        out = apply_K(power_spec, h)
        for i in range(0, grid200.size - 20, 13):
            x = grid200[i]
            tail = tail_mass_bound(x, grid200[-1], power_spec.lam, power_spec.r)
            total = out.values[i] + source_at(power_spec, x)
            assert 1.0 - tail - 5e-3 <= total <= 1.0 + 5e-3

    def test_contraction_on_random_nonneg_functions(self, power_spec, grid200):
        kappa = contraction_bound(power_spec)
        rng = stream_rng(23, 0)
        for _ in range(100):
            h = GridFunction(grid200, rng.random(grid200.size))
            out = apply_K(power_spec, h)
            assert out.norm_l1() <= (kappa + 10.0 * power_spec.quad_tol) * h.norm_l1()


class TestNeumann:
    def test_m_zero_is_source(self, power_spec, grid200):
        p0, rep = neumann_solve(power_spec, grid200, m=0)
        s = source_s(power_spec, grid200)
        np.testing.assert_array_equal(p0.values, s.values)
        assert rep.m == 0

    def test_partial_sum_equals_hitting_sum(self, power_spec, grid200):
        # p_m = sum_{k=1}^{m+1} t_k must hold bitwise, not just closely
        m = 6
        p, _ = neumann_solve(power_spec, grid200, m=m)
        ts = hitting_time_probs(power_spec, grid200, m_max=m + 1)
        total = ts[0].values.copy()
        for t in ts[1:]:
            total += t.values
        np.testing.assert_array_equal(p.values, total)

    def test_first_hitting_term_is_source_bitwise(self, power_spec, grid200):
        t = hitting_time_probs(power_spec, grid200, m_max=1)
        s = source_s(power_spec, grid200)
        np.testing.assert_array_equal(t[0].values, s.values)

    def test_hitting_norms_decay_geometrically(self, power_spec, grid200):
        kappa = contraction_bound(power_spec)
        ts = hitting_time_probs(power_spec, grid200, m_max=6)
        s_norm = ts[0].norm_l1()
        for k, t in enumerate(ts, start=1):
            assert t.norm_l1() <= kappa ** (k - 1) * s_norm * (1.0 + 1e-9)

    def test_monotone_in_m_and_bounded(self, power_spec, grid200):
        p9, _ = neumann_solve(power_spec, grid200, m=9)
        p10, rep = neumann_solve(power_spec, grid200, m=10)
        assert np.all(p10.values >= p9.values)
        assert np.all(p10.values >= 0.0)
        assert np.all(p10.values <= 1.0 + 1e-9)
        # successive-sum gap is the next hitting term, bounded geometrically
        assert l1_distance(p10, p9) <= rep.kappa**10 * rep.s_norm * (1.0 + 1e-9)

    def test_report_contents(self, power_spec, grid200):
        p, rep = neumann_solve(power_spec, grid200, m=10, x_eval=(1.1, 2.0))
        np.testing.assert_allclose(rep.kappa, 0.55, atol=1e-12)
        assert rep.tail_bound == rep.s_norm * rep.kappa**11 / (1.0 - rep.kappa)
        expect_trunc = max(
            tail_mass_bound(v, grid200[-1], 1.0, 1.0) for v in (1.1, 2.0)
        )
        assert rep.truncation_diag == expect_trunc
        clone = SolverReport.from_json(rep.to_json())
        assert clone == rep

    def test_near_boundary_value_dominated_by_source(self, power_spec, grid200):
        p, _ = neumann_solve(power_spec, grid200, m=10)
        s = source_s(power_spec, grid200)
        assert p.values[0] >= s.values[0]
        assert p.values[0] >= 0.99  # one step from the boundary absorbs a.s.

    def test_grid_refinement_stability(self, power_spec):
        vals = {}
        for size in (100, 200, 400):
            p, _ = neumann_solve(
                power_spec, default_grid(grid_size=size, x_max=1000.0), m=10
            )
            vals[size] = p(1.1)
        coarse_step = abs(vals[200] - vals[100])
        fine_step = abs(vals[400] - vals[200])
        assert fine_step <= 2.0 * max(coarse_step, 1e-6)

    def test_reference_value_regression(self, power_spec):
        # frozen from a 400-node run validated against Monte Carlo
        p, _ = neumann_solve(power_spec, default_grid(grid_size=400), m=10)
        np.testing.assert_allclose(p(1.1), 0.3852027, rtol=1e-5)

    def test_validation(self, power_spec, grid200):
        with pytest.raises(ValueError):
            neumann_solve(power_spec, grid200, m=-1)
        with pytest.raises(ValueError):
            hitting_time_probs(power_spec, grid200, m_max=0)


class TestDistances:
    def test_zero_for_identical(self):
        f = GridFunction(np.array([1.0, 1.5, 2.0]), np.array([0.3, 0.8, 0.1]))
        assert l1_distance(f, f) == 0.0
        assert ise(f, f) == 0.0

    def test_constant_offset_on_unit_interval(self):
        nodes = np.linspace(1.0, 2.0, 41)
        f = GridFunction(nodes, np.full(nodes.size, 0.7))
        z = GridFunction(nodes, np.zeros(nodes.size))
        np.testing.assert_allclose(l1_distance(f, z), 0.7, rtol=1e-14)
        np.testing.assert_allclose(ise(f, z), 0.49, rtol=1e-14)

    def test_resampling_route(self):
        nodes = np.linspace(1.0, 2.0, 41)
        f = GridFunction(nodes, np.full(nodes.size, 0.5))
        g = GridFunction(np.array([1.0, 2.0]), np.array([0.5, 0.5]))
        np.testing.assert_allclose(l1_distance(f, g), 0.0, atol=1e-15)
