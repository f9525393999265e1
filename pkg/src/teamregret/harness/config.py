"""Run configuration: INI-style config files with typed, documented keys.

Sections and keys (all optional unless marked required):

[run]
  method      required: vrm | bvrm | bvrm_shaping | iql | vdn | arm
  env         required: matrix | battle
  iterations  training iterations (default 2000)
  eval_cadence  evaluate/checkpoint every this many iterations (default 50)
  eval_episodes episodes per cadence evaluation (default 50)

[train]   (defaults in parentheses)
  gamma (0.99), k (4), batch_episodes (32 matrix / 4 battle),
  learning_rate (1e-3), optimizer (adam|sgd, adam),
  epsilon_start (1.0), epsilon_end (0.2 matrix / 0.05 battle),
  epsilon_decay_frac (0.15 matrix / 0.5 battle),
  snapshot_period (1), target_period (100),
  hidden_width (64), hidden_depth (2), select_mode (greedy|regret_matching),
  q_target_form (printed|advantage, printed),
  strict_paper_advantage (false), concat_obs (false), freeze_filter (false)

[belief]
  particles (16), hidden_dim (32), kappa_dim (32), beta (0.5),
  net_width (32), likelihood_on_propagated (false)

[env]
  matrix: payoff_file (optional path)
  battle: width (20), height (20), team_size (8), max_ticks (60),
          view (7), hp (2), opponent (self|scripted, self)
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass
from pathlib import Path

from ..belief import FilterConfig
from ..envs import BattleConfig, BattleEnv, MatrixGame, load_payoffs
from ..trainer import METHODS, TrainConfig

ENVS = ("matrix", "battle")

# per-environment defaults where the shared TrainConfig default is not the
# right fit: the matrix game wants sustained exploration with a short anneal
# (the regret accumulation thrives there and the Q baselines do not), the
# battle wants small batches of long episodes
ENV_TRAIN_DEFAULTS = {
    "matrix": {"batch_episodes": 32, "epsilon_end": 0.2, "epsilon_decay_frac": 0.15},
    "battle": {"batch_episodes": 4, "epsilon_end": 0.05, "epsilon_decay_frac": 0.5},
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    method: str
    env: str
    iterations: int = 2000
    eval_cadence: int = 50
    eval_episodes: int = 50
    seed: int = 0
    train: TrainConfig = dataclasses.field(default_factory=TrainConfig)
    filter: FilterConfig = dataclasses.field(default_factory=FilterConfig)
    env_options: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.env not in ENVS:
            raise ConfigError(f"unknown env {self.env!r}; choose from {ENVS}")
        if self.iterations < 1 or self.eval_cadence < 1 or self.eval_episodes < 1:
            raise ConfigError("iterations, eval_cadence, eval_episodes must be positive")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "env": self.env,
            "iterations": self.iterations,
            "eval_cadence": self.eval_cadence,
            "eval_episodes": self.eval_episodes,
            "seed": self.seed,
            "train": dataclasses.asdict(self.train),
            "filter": dataclasses.asdict(self.filter),
            "env_options": dict(self.env_options),
        }


def _coerce(value: str, target_type):
    if target_type is bool:
        low = value.strip().lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {value!r}")
    return target_type(value)


def _fill_dataclass(cls, section: dict, defaults: dict, where: str):
    field_types = {f.name: f.type for f in dataclasses.fields(cls)}
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = dict(defaults)
    for key, raw in section.items():
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in [{where}]")
        ftype = known[key].default.__class__ if known[key].default is not dataclasses.MISSING else float
        try:
            kwargs[key] = _coerce(raw, ftype)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad value for {where}.{key}: {e}") from e
    try:
        return cls(**kwargs)
    except ValueError as e:
        raise ConfigError(f"invalid [{where}] section: {e}") from e


def load_config(path, seed: int = 0, iterations: int | None = None) -> RunConfig:
    """Parse a config file; CLI seed and iteration overrides come in here."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")

    sections = {name: dict(parser.items(name)) for name in parser.sections()}
    for name in sections:
        if name not in ("run", "train", "belief", "env"):
            raise ConfigError(f"unknown section [{name}]")

    run = sections.get("run", {})
    for key in run:
        if key not in ("method", "env", "iterations", "eval_cadence", "eval_episodes"):
            raise ConfigError(f"unknown key {key!r} in [run]")
    if "method" not in run or "env" not in run:
        raise ConfigError("[run] must set both method and env")

    env_name = run["env"]
    if env_name not in ENVS:
        raise ConfigError(f"unknown env {env_name!r}; choose from {ENVS}")
    train_defaults = dict(ENV_TRAIN_DEFAULTS[env_name])
    train = _fill_dataclass(TrainConfig, sections.get("train", {}), train_defaults, "train")
    filter_cfg = _fill_dataclass(FilterConfig, sections.get("belief", {}), {}, "belief")

    env_section = dict(sections.get("env", {}))
    env_options = _parse_env_options(env_name, env_section)

    config = RunConfig(
        method=run["method"],
        env=env_name,
        iterations=int(iterations if iterations is not None else run.get("iterations", 2000)),
        eval_cadence=int(run.get("eval_cadence", 50)),
        eval_episodes=int(run.get("eval_episodes", 50)),
        seed=seed,
        train=train,
        filter=filter_cfg,
        env_options=env_options,
    )
    return config


def _parse_env_options(env_name: str, section: dict) -> dict:
    if env_name == "matrix":
        allowed = {"payoff_file": str}
    else:
        allowed = {"width": int, "height": int, "team_size": int, "max_ticks": int,
                   "view": int, "hp": int, "opponent": str}
    options = {}
    for key, raw in section.items():
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in [env] for env {env_name}")
        options[key] = _coerce(raw, allowed[key])
    if env_name == "battle":
        opponent = options.get("opponent", "self")
        if opponent not in ("self", "scripted"):
            raise ConfigError("env.opponent must be self or scripted")
    return options


def config_from_dict(data: dict) -> RunConfig:
    """Rebuild a RunConfig from its to_dict() form (checkpoint metadata)."""
    return RunConfig(
        method=data["method"],
        env=data["env"],
        iterations=int(data["iterations"]),
        eval_cadence=int(data["eval_cadence"]),
        eval_episodes=int(data["eval_episodes"]),
        seed=int(data["seed"]),
        train=TrainConfig(**data["train"]),
        filter=FilterConfig(**data["filter"]),
        env_options=dict(data.get("env_options", {})),
    )


def build_env(config: RunConfig):
    if config.env == "matrix":
        payoffs = None
        payoff_file = config.env_options.get("payoff_file")
        if payoff_file:
            payoffs = load_payoffs(Path(payoff_file))
        return MatrixGame(payoffs)
    options = {k: v for k, v in config.env_options.items() if k != "opponent"}
    return BattleEnv(BattleConfig(**options))
