"""Built-in Dec-POMDP environments behind one stepping interface."""

from .base import EnvSpec, StepResult
from .matrix_game import (
    MatrixGame,
    MatrixGameState,
    canonical_payoffs,
    load_payoffs,
    matrix_optimal,
    step_matrix,
)
from .battle import (
    BattleConfig,
    BattleEnv,
    BattleState,
    RewardEvent,
    Unit,
    UTILITIES,
    scripted_opponent,
    scripted_team_actions,
    step_battle,
    team_reward,
)

__all__ = [
    "EnvSpec",
    "StepResult",
    "MatrixGame",
    "MatrixGameState",
    "canonical_payoffs",
    "load_payoffs",
    "matrix_optimal",
    "step_matrix",
    "BattleConfig",
    "BattleEnv",
    "BattleState",
    "RewardEvent",
    "Unit",
    "UTILITIES",
    "scripted_opponent",
    "scripted_team_actions",
    "step_battle",
    "team_reward",
]
