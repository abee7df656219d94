"""Circle-crossing crowd navigation: simulator, relational value model and
the training/evaluation loops. Thin re-export of the compiled module."""

from ._hetnav import (
    AgentState,
    ConfigError,
    Environment,
    ModelParams,
    ScenarioConfig,
    Vec2,
    action_space,
    evaluate,
    evaluate_random,
    greedy_action,
    init_params,
    load_checkpoint,
    run_selfchecks,
    run_training,
    value,
)

__all__ = [
    "AgentState",
    "ConfigError",
    "Environment",
    "ModelParams",
    "ScenarioConfig",
    "Vec2",
    "action_space",
    "evaluate",
    "evaluate_random",
    "greedy_action",
    "init_params",
    "load_checkpoint",
    "run_selfchecks",
    "run_training",
    "value",
]
