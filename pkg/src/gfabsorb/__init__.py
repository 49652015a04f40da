"""Absorption features of a growth-fragmentation process.

Simulation of the underlying piecewise-deterministic dynamics,
semi-parametric estimation of its jump ingredients, exact and plug-in
transition densities, and a Neumann-series solver for the absorption
probability and hitting-time distribution.
"""

from .densities import DivergentIntegralError, PowerDensity, TabulatedDensity
from .estimators import (
    KdeEstimate,
    LambdaEstimate,
    bandwidth_silverman,
    estimate_lambda_tmle,
    estimator_report,
    kde_eval,
    sup_norm_diagnostic,
    weighted_l1_diagnostic,
)
from .experiment import (
    ExperimentConfig,
    ReplicateTable,
    emit_figures,
    load_config,
    run_replicates,
)
from .fredholm import (
    ContractionError,
    GridFunction,
    SolverReport,
    apply_K,
    contraction_bound,
    default_grid,
    hitting_time_probs,
    ise,
    l1_distance,
    neumann_solve,
    source_at,
    source_s,
)
from .kernel import (
    KernelSpec,
    beta_integral,
    beta_integral_batch,
    column_mass,
    f_lambda,
    f_lambda_envelope,
    row_mass,
    sup_error_bound,
    tail_mass_bound,
    transition_density,
    transition_density_batch,
)
from .mc import McReport, mc_absorption
from .model import (
    ChainPath,
    ModelParams,
    Trajectory,
    flow,
    inverse_flow_time,
    sample_interarrival,
    sample_loss_fraction,
    simulate_chain,
    simulate_trajectory,
    stream_rng,
)
from .quadrature import QuadratureError

__version__ = "0.1.0"
