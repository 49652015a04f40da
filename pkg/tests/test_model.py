"""Deterministic flow, embedded chain, and trajectory simulation."""

import io
import math

import numpy as np
import pytest

from gfabsorb import (
    ChainPath,
    ModelParams,
    PowerDensity,
    flow,
    inverse_flow_time,
    sample_interarrival,
    simulate_chain,
    simulate_trajectory,
    source_at,
    stream_rng,
)


class TestFlow:
    def test_frozen_at_or_below_one(self):
        assert flow(1.0, 5.0, 1.0) == 1.0
        assert flow(0.5, 3.0, 1.0) == 0.5
        assert flow(0.0, 2.0, 4.0) == 0.0

    def test_exponential_growth_above_one(self):
        np.testing.assert_allclose(flow(2.0, math.log(2.0), 1.0), 3.0, rtol=1e-15)
        np.testing.assert_allclose(flow(3.0, 0.5, 2.0), 1.0 + 2.0 * math.e, rtol=1e-15)

    def test_zero_time_identity(self):
        for x in (0.3, 1.0, 1.7, 42.0):
            assert flow(x, 0.0, 1.3) == x

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            flow(2.0, -0.1, 1.0)

    def test_semigroup(self):
        rng = stream_rng(7, 0)
        for _ in range(100):
            x = 1.0 + 2.0 * rng.random()
            s, t = rng.random(2)
            r = 0.5 + rng.random()
            np.testing.assert_allclose(
                flow(x, s + t, r), flow(flow(x, s, r), t, r), rtol=1e-12
            )

    def test_vectorized(self):
        x = np.array([0.5, 1.0, 2.0])
        out = flow(x, 1.0, 1.0)
        np.testing.assert_allclose(out, [0.5, 1.0, 1.0 + math.e], rtol=1e-15)


class TestInverseFlowTime:
    def test_examples(self):
        np.testing.assert_allclose(inverse_flow_time(2.0, 3.0, 1.0), math.log(2.0), rtol=1e-15)
        assert inverse_flow_time(2.0, 2.0, 1.0) == 0.0
        np.testing.assert_allclose(
            inverse_flow_time(1.5, 5.0, 2.0), 0.5 * math.log(8.0), rtol=1e-15
        )

    def test_round_trip(self):
        for x, t, r in [(1.2, 0.7, 1.0), (4.0, 2.5, 0.3)]:
            y = flow(x, t, r)
            np.testing.assert_allclose(inverse_flow_time(x, y, r), t, rtol=1e-12)

    def test_domain(self):
        with pytest.raises(ValueError):
            inverse_flow_time(1.0, 2.0, 1.0)  # x must exceed 1
        with pytest.raises(ValueError):
            inverse_flow_time(2.0, 1.5, 1.0)  # y below x unreachable


def test_sample_interarrival_exponential():
    rng = stream_rng(3, 1)
    s = sample_interarrival(2.0, rng, 100_000)
    assert np.all(s > 0.0)
    se = s.std(ddof=1) / np.sqrt(s.size)
    assert abs(s.mean() - 0.5) <= 3.0 * se


def test_stream_rng_reproducible_and_keyed():
    a = stream_rng(42, 1, 2).random(8)
    b = stream_rng(42, 1, 2).random(8)
    c = stream_rng(42, 1, 3).random(8)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


class TestChain:
    def test_below_one_is_pure_fragmentation(self, reference_params):
        # no growth below the barrier: Z_k = x0 * prod(Y_1..Y_k)
        rng = stream_rng(5, 0)
        path = simulate_chain(reference_params, 0.5, 40, rng)
        assert path.absorbed_at == 0
        assert len(path.z) == 40
        np.testing.assert_allclose(path.z, 0.5 * np.cumprod(path.y), rtol=1e-15)

    def test_stops_at_first_absorption(self, reference_params):
        rng = stream_rng(5, 1)
        for _ in range(200):
            path = simulate_chain(reference_params, 1.5, 100, rng)
            if path.absorbed_at is not None:
                assert path.absorbed_at == len(path.z)
                assert path.z[-1] <= 1.0
                assert np.all(np.asarray(path.z[:-1]) > 1.0)
            else:
                assert path.truncated
                assert np.all(np.asarray(path.z) > 1.0)

    def test_reconstruction_residual_is_exactly_zero(self, reference_params):
        # the stored triplets must replay bitwise through the update rule
        rng = stream_rng(5, 2)
        path = simulate_chain(reference_params, 2.0, 60, rng)
        state = path.x0
        for s, y, z in zip(path.s, path.y, path.z):
            state = flow(state, s, reference_params.r) * y
            assert state == z

    def test_one_jump_absorption_frequency_matches_source(self, power_spec, reference_params):
        # dual route: MC frequency of absorbed_at == 1 vs the quadrature value
        # of s(x) = int_0^1 R(x, y) dy at x = 1.1
        n = 100_000
        rng = stream_rng(5, 3)
        x0 = 1.1
        st = sample_interarrival(reference_params.lam, rng, n)
        yt = reference_params.g.sample(rng, n)
        z1 = (x0 - 1.0) * np.exp(reference_params.r * st) + 1.0
        hits = int(np.count_nonzero(z1 * yt <= 1.0))
        p_hat = hits / n
        se = math.sqrt(p_hat * (1.0 - p_hat) / n)
        s_exact = source_at(power_spec, x0)
        assert abs(p_hat - s_exact) <= 3.0 * se

    def test_json_round_trip(self, reference_params):
        path = simulate_chain(reference_params, 2.0, 30, stream_rng(5, 4))
        clone = ChainPath.from_json(path.to_json())
        assert clone.x0 == path.x0
        assert clone.absorbed_at == path.absorbed_at
        assert clone.truncated == path.truncated
        np.testing.assert_array_equal(clone.s, path.s)
        np.testing.assert_array_equal(clone.y, path.y)
        np.testing.assert_array_equal(clone.z, path.z)

    def test_csv_round_trip(self, reference_params, tmp_path):
        path = simulate_chain(reference_params, 2.0, 30, stream_rng(5, 5))
        f = tmp_path / "chain.csv"
        path.write_csv(f)
        clone = ChainPath.read_csv(f)
        np.testing.assert_array_equal(clone.z, path.z)
        assert clone.x0 == path.x0
        buf = io.StringIO()
        path.write_csv(buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "k,s_k,y_k,z_k"
        assert lines[1].startswith("0,,,")  # k = 0 row carries the start state


class TestLemmaFactorization:
    """Interarrival times and loss fractions are independent of the state."""

    def test_correlation_and_marginal(self, reference_params):
        rng = stream_rng(5, 6)
        ss, ys = [], []
        for _ in range(400):
            path = simulate_chain(reference_params, 2.0, 25, rng)
            ss.extend(path.s)
            ys.extend(path.y)
        s = np.asarray(ss)
        y = np.asarray(ys)
        n = s.size
        assert n > 3000
        rho = np.corrcoef(s, y)[0, 1]
        assert abs(rho) < 3.0 / np.sqrt(n)
        # KS distance of the Y marginal against the sampling density's cdf
        emp = np.arange(1, n + 1) / n
        ks = np.max(np.abs(emp - reference_params.g.cdf(np.sort(y))))
        assert ks <= 1.63 / np.sqrt(n)  # 1% level


class TestTrajectory:
    def test_poisson_jump_rate(self, reference_params):
        # lam = 1 on [0, 100]: mean jump count 100 within 3 standard errors
        rng = stream_rng(5, 7)
        counts = np.array(
            [
                len(simulate_trajectory(reference_params, 2.0, 100.0, rng).jump_times)
                for _ in range(10_000)
            ]
        )
        se = counts.std(ddof=1) / np.sqrt(counts.size)
        assert abs(counts.mean() - 100.0) <= 3.0 * se

    def test_state_at_follows_flow_between_jumps(self, reference_params):
        traj = simulate_trajectory(reference_params, 2.0, 4.0, stream_rng(5, 8))
        t0 = 0.0
        x0 = traj.x0
        for tj, pre, post in zip(traj.jump_times, traj.pre_jump, traj.post_jump):
            mid = 0.5 * (t0 + tj)
            np.testing.assert_allclose(
                traj.state_at(mid), flow(x0, mid - t0, reference_params.r), rtol=1e-12
            )
            np.testing.assert_allclose(pre, flow(x0, tj - t0, reference_params.r), rtol=1e-12)
            t0, x0 = tj, post

    def test_absorption_is_permanent(self, reference_params):
        # once at or below 1 the state can never climb back
        rng = stream_rng(5, 9)
        seen = 0
        for _ in range(50):
            traj = simulate_trajectory(reference_params, 1.05, 6.0, rng)
            post = np.asarray(traj.post_jump)
            low = np.flatnonzero(post <= 1.0)
            if low.size:
                seen += 1
                assert np.all(post[low[0] :] <= 1.0)
                t_abs = traj.jump_times[low[0]]
                for t in np.linspace(t_abs, traj.horizon, 20):
                    assert traj.state_at(t) <= 1.0
        assert seen >= 10

    def test_to_rows_covers_both_jump_sides(self, reference_params):
        traj = simulate_trajectory(reference_params, 2.0, 3.0, stream_rng(5, 10))
        rows = traj.to_rows()
        t = np.array([r[0] for r in rows])
        assert t[0] == 0.0 and t[-1] == traj.horizon
        assert np.all(np.diff(t) >= 0.0)
        for tj in traj.jump_times:
            assert np.count_nonzero(t == tj) == 2  # pre and post value


def test_model_params_validation(power_g=PowerDensity(10.0)):
    with pytest.raises(ValueError):
        ModelParams(0.3, 1.0, power_g, 0.5, 2.0)  # lam below truncation range
    with pytest.raises(ValueError):
        ModelParams(1.0, -1.0, power_g, 0.5, 2.0)
    with pytest.raises(ValueError):
        ModelParams(1.0, 1.0, power_g, 2.0, 0.5)
