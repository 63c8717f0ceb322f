"""Causal-bound-informed CVaR bandits from confounded expert data."""

from .bandit import (
    POLICIES,
    BanditConfig,
    RegretTrace,
    clipped_index,
    cvar_regret,
    exploration_radius,
    optimistic_cdf,
    prune_arms,
    regret_identity,
    run_episode,
    select_action,
    pull_count_bound,
    true_arm_statistics,
    ucb1_index,
)
from .causal_bounds import (
    BoundProblem,
    DoBoundResult,
    InconsistentInputsError,
    ProbabilityInterval,
    UnidentifiableArmError,
    brute_force_do_bounds,
    do_interval,
    do_probability_bounds,
    solve_bound_problem,
    tian_pearl_bounds,
)
from .cvar import (
    CvarInterval,
    EmptyFeasibleSetError,
    OutcomeIntervalSet,
    StepCDF,
    cvar_bounds_binary,
    cvar_bounds_dominance,
    cvar_bounds_general,
    cvar_discrete,
    cvar_grid_oracle,
    cvar_interval,
    cvar_of_cdf,
)
from .harness import (
    ConfigError,
    ExperimentConfig,
    bounds_pipeline,
    generate_expert_dataset,
    load_config,
    oracle_check,
    run_experiment,
)
from .model import (
    BINARY_SUPPORT,
    ConfoundedModel,
    DiscreteDistribution,
    EmpiricalCDF,
    InsufficientDataError,
    JointActionRewardTable,
    ObservationalDataset,
    RewardSupport,
    ValidationError,
    exact_joint_table,
    interventional_distribution,
    joint_table,
    sample_expert,
    two_context_model,
)

__version__ = "0.1.0"
