"""Shared fixtures: reference model specs and a fitted estimate."""

import numpy as np
import pytest

from gfabsorb import (
    KdeEstimate,
    KernelSpec,
    ModelParams,
    PowerDensity,
    TabulatedDensity,
    estimate_lambda_tmle,
    sample_interarrival,
    sample_loss_fraction,
    stream_rng,
)


@pytest.fixture(scope="session")
def power_g():
    return PowerDensity(10.0)


@pytest.fixture(scope="session")
def power_spec(power_g):
    # the reference model: lam = r = 1, G = 11 u^10
    return KernelSpec(1.0, 1.0, power_g, quad_tol=1e-8)


@pytest.fixture(scope="session")
def uniform01_spec():
    # G uniform on [0, 1]; closed forms exist for R and s when lam = r
    return KernelSpec(1.0, 1.0, PowerDensity(0.0), quad_tol=1e-10)


@pytest.fixture(scope="session")
def uniform_half_g():
    return TabulatedDensity(lambda u: np.full_like(u, 2.0), support=(0.5, 1.0))


@pytest.fixture(scope="session")
def uniform_half_spec(uniform_half_g):
    return KernelSpec(1.0, 1.0, uniform_half_g, quad_tol=1e-10)


@pytest.fixture(scope="session")
def reference_params(power_g):
    return ModelParams(1.0, 1.0, power_g, 0.5, 2.0)


@pytest.fixture(scope="session")
def fitted_pair(power_g):
    """(lam_est, kde) from one synthetic n = 100 sample."""
    rng = stream_rng(20260819, 0, 100, 0)
    s_obs = sample_interarrival(1.0, rng, 100)
    y_obs = sample_loss_fraction(power_g, rng, 100)
    return estimate_lambda_tmle(s_obs, 0.5, 2.0), KdeEstimate(y_obs)
