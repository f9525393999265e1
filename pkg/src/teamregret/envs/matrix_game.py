"""Two-step cooperative matrix game.

Both agents first pick one of two blocks, jointly selecting one of four
2x2 payoff matrices; then each picks a cell coordinate inside it. The team
reward is paid only after the second step, and neither agent ever observes
its teammate's choices. The canonical payoffs put an 8 / -12 / 0 structure
in the (0, 0) block and a flat 7 everywhere else, so the optimum requires
coordinating on (0, 0) twice while uncoordinated play is safest at 7.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .base import EnvSpec, StepResult

PHASE_CHOOSE_MATRIX = 0
PHASE_CHOOSE_CELL = 1
PHASE_TERMINAL = 2

OBS_DIM = 6  # agent id one-hot, phase one-hot (2), own first choice one-hot
STATE_DIM = 7  # phase one-hot (3), joint first choice one-hot (4)


def canonical_payoffs() -> np.ndarray:
    payoffs = np.full((2, 2, 2, 2), 7.0)
    payoffs[0, 0] = [[8.0, -12.0], [-12.0, 0.0]]
    return payoffs


def load_payoffs(path) -> np.ndarray:
    """Read a 4-matrix payoff file: one header line, then 16 whitespace-
    separated reals, row-major over [choice1][choice2][cell1][cell2]."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty payoff file")
    values: list[float] = []
    for line in lines[1:]:
        values.extend(float(tok) for tok in line.split())
    if len(values) != 16:
        raise ValueError(f"{path}: expected 16 payoff entries, found {len(values)}")
    return np.array(values).reshape(2, 2, 2, 2)


@dataclass
class MatrixGameState:
    phase: int
    first_choices: tuple[int, int] | None
    payoffs: np.ndarray


def step_matrix(state: MatrixGameState, joint_action) -> tuple[float, bool]:
    """Advance one phase; the reward appears only when the cell is chosen."""
    a1, a2 = int(joint_action[0]), int(joint_action[1])
    if state.phase == PHASE_TERMINAL:
        raise ValueError("matrix game episode is already over")
    if not (0 <= a1 < 2 and 0 <= a2 < 2):
        raise ValueError(f"matrix game actions must lie in [0, 2), got {(a1, a2)}")
    if state.phase == PHASE_CHOOSE_MATRIX:
        state.first_choices = (a1, a2)
        state.phase = PHASE_CHOOSE_CELL
        return 0.0, False
    c1, c2 = state.first_choices
    state.phase = PHASE_TERMINAL
    return float(state.payoffs[c1, c2, a1, a2]), True


def matrix_optimal(payoffs) -> tuple[float, list[tuple[int, int, int, int]]]:
    """Brute-force maximum over all 16 joint trajectories."""
    p = np.asarray(payoffs, dtype=np.float64)
    best = float(p.max())
    argmax = [tuple(int(v) for v in idx) for idx in zip(*np.nonzero(p == best))]
    return best, argmax


class MatrixGame:
    """Environment wrapper with per-agent observations and a global state."""

    def __init__(self, payoffs: np.ndarray | None = None):
        self.payoffs = canonical_payoffs() if payoffs is None else np.asarray(payoffs, float)
        if self.payoffs.shape != (2, 2, 2, 2):
            raise ValueError(f"payoff tensor must be 2x2x2x2, got {self.payoffs.shape}")
        if not np.isfinite(self.payoffs).all():
            raise ValueError("payoffs must be finite")
        self.spec = EnvSpec(
            n_agents=2, n_actions=2, obs_dim=OBS_DIM, state_dim=STATE_DIM, max_len=2,
            name="matrix",
        )
        self.state: MatrixGameState | None = None

    def reset(self, rng: np.random.Generator | None = None):
        self.state = MatrixGameState(PHASE_CHOOSE_MATRIX, None, self.payoffs)
        return self._observations(), self._global_state()

    def step(self, actions) -> StepResult:
        reward, done = step_matrix(self.state, actions)
        return StepResult(
            observations=self._observations(),
            reward=reward,
            state=self._global_state(),
            done=done,
        )

    def _observations(self) -> np.ndarray:
        obs = np.zeros((2, OBS_DIM))
        if self.state.phase == PHASE_TERMINAL:
            return obs
        for i in range(2):
            obs[i, i] = 1.0
            obs[i, 2 + self.state.phase] = 1.0
            if self.state.phase == PHASE_CHOOSE_CELL:
                obs[i, 4 + self.state.first_choices[i]] = 1.0
        return obs

    def _global_state(self) -> np.ndarray:
        state = np.zeros(STATE_DIM)
        state[self.state.phase] = 1.0
        if self.state.first_choices is not None:
            c1, c2 = self.state.first_choices
            state[3 + 2 * c1 + c2] = 1.0
        return state
