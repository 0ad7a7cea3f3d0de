"""Risk-sensitive planning and optimistic learning for tabular episodic MDPs."""
from .augment import (
    AdaptedPolicy,
    AugmentedMdp,
    AugmentedPolicy,
    adapt_policy,
    build_augmented,
    build_tilde_policy,
    discretize_rewards,
)
from .envs import FrozenLakeSpec, corridor_policy, list_envs, load_env, make_frozen_lake, make_test_mdps
from .errors import ContractError, DomainError, OracleTooLargeError, RiskLabError
from .learner import LearnerConfig, RegretTrace, optimism_audit, run_learning
from .mdp import Episode, History, TabularMdp, exact_return_distribution, make_rng, markov_policy, rollout
from .optimist import CountsModel, confidence_widths, empirical_model, optimistic_model, update_counts
from .planner import (
    CvarPlanResult,
    ReturnTable,
    evaluate_policy_distribution,
    plan_bruteforce,
    plan_cvar,
    plan_expected,
    plan_optimal,
    return_table,
)
from .riskdist import (
    DiscreteDistribution,
    WeightingFunction,
    cdf_sup_distance,
    cvar,
    make_weighting,
    phi_cdf,
    phi_quantile,
    quantile,
)

__version__ = "0.1.0"
