"""CLI front end, experiment orchestration, metrics, plots, checkpoints."""

from .config import ConfigError, RunConfig, build_env, config_from_dict, load_config
from .plotting import emit_plots, moving_average
from .run import (
    CSV_HEADER,
    EvalReport,
    LoadedCheckpoint,
    load_checkpoint,
    restore_trainer,
    run_eval,
    run_train,
    save_checkpoint,
)

__all__ = [
    "ConfigError",
    "RunConfig",
    "build_env",
    "config_from_dict",
    "load_config",
    "emit_plots",
    "moving_average",
    "CSV_HEADER",
    "EvalReport",
    "LoadedCheckpoint",
    "load_checkpoint",
    "restore_trainer",
    "run_eval",
    "run_train",
    "save_checkpoint",
]
