"""Common environment interface: spec metadata and the step result record."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np


@dataclass
class EnvSpec:
    """Static sizes of a built-in environment."""

    n_agents: int
    n_actions: int
    obs_dim: int
    state_dim: int
    max_len: int
    name: str
    opponent_hook: Callable | None = None  # battle only

    def __post_init__(self):
        for attr in ("n_agents", "n_actions", "obs_dim", "state_dim", "max_len"):
            if getattr(self, attr) < 1:
                raise ValueError(f"EnvSpec.{attr} must be positive")


@dataclass
class StepResult:
    observations: np.ndarray  # (n_agents, obs_dim) for the learning team
    reward: float  # shared team reward
    state: np.ndarray  # global state (state_dim,)
    done: bool
    info: dict[str, Any] = field(default_factory=dict)
