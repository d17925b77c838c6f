"""Bootstrapped reward shaping on tabular MDPs."""

from .bsrs import (
    ShapeConfig,
    admissible_eta_range,
    contraction_factor,
    fixed_point_prediction,
    self_shaped_solve,
    shaped_backup,
    shaped_backup_lagged,
)
from .equivalence import (
    LinearModel,
    Transition,
    sarsa0_decomposition_check,
    static_potential_residual,
    td0_update_rescaled,
    td0_update_shaped,
)
from .mdp import GridworldSpec, TabularMdp, build_gridworld, expected_next, random_mdp
from .operators import (
    ConvergenceReport,
    bellman_backup,
    greedy_policy,
    pbrs_transform,
    solve,
    value_iteration,
)
from .sampler import EpisodeLog, QLearnConfig, evaluate_policy, q_learn

__version__ = "0.1.0"
