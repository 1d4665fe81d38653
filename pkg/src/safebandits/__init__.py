"""Simulation laboratory for safety-constrained stochastic multi-armed bandits."""

from .agents import ALGORITHMS, Agent, AgentSpec, ArmStatistics, make_agent, pairwise_policy_value
from .bounds import (
    BoundReport,
    bound_report,
    gap_independent_bound,
    lower_bound_coeff,
    regret_main_term,
    unsafe_main_term,
)
from .env import ArmLaw, GroundTruth, SafeBanditInstance, binarize, ground_truth, regret_increment
from .harness import (
    AgentResult,
    AggregateSeries,
    ConfigError,
    ExperimentConfig,
    SweepResult,
    TrialFault,
    TrialSeries,
    run_experiment,
    run_trial,
    sweep,
    write_results,
)
from .numerics import (
    BetaParams,
    NumericsError,
    RngStream,
    bern_kl,
    bern_kl_above,
    bern_kl_below,
    beta_cdf,
    beta_quantile,
    beta_sample,
    kl_lcb,
    kl_ucb,
    make_rng,
)

__version__ = "0.1.0"
