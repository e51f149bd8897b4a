"""Maximal probability of reaching a target set before leaving a safe set.

Finite controlled Markov models, value iteration, exact policy evaluation,
reward variants, Monte Carlo martingale diagnostics and a grid
discretization of a scalar linear-Gaussian system.
"""

__version__ = "0.1.0"

from .bellman import (
    SolveResult,
    apply_T,
    evaluate_policy,
    extract_policy,
    value_iteration,
)
from .discretize import Linear1DSystem, build_grid_model, greedy_oracle, one_step_value
from .linear import SingularChainError, induce_chain, solve_hitting
from .model import (
    InvalidModelError,
    ModelFormatError,
    ReachAvoidModel,
    StateClass,
    load_model,
    save_model,
    validate_model,
)
from .rewards import RewardSpec, evaluate_reward, make_variant, reward_value_iteration
from .simulate import martingale_diagnostics, sample_trajectories, zeta_process

__all__ = [
    "__version__",
    "ReachAvoidModel",
    "StateClass",
    "ModelFormatError",
    "InvalidModelError",
    "validate_model",
    "load_model",
    "save_model",
    "SolveResult",
    "apply_T",
    "value_iteration",
    "extract_policy",
    "evaluate_policy",
    "SingularChainError",
    "induce_chain",
    "solve_hitting",
    "RewardSpec",
    "make_variant",
    "reward_value_iteration",
    "evaluate_reward",
    "sample_trajectories",
    "zeta_process",
    "martingale_diagnostics",
    "Linear1DSystem",
    "build_grid_model",
    "greedy_oracle",
    "one_step_value",
]
