"""Grid battle between two armies.

Units move or attack in the four cardinal directions (plus no-op) on a
shared grid. Moves resolve simultaneously and conservatively: movers
aiming at the same cell all stay, and a move into a cell whose occupant
stays is cancelled. Attacks then resolve simultaneously against the
post-move positions, so resolution carries no positional or team-order
bias. Per-unit reward events are scored with fixed utilities and summed
into one team reward per side.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .base import EnvSpec, StepResult

# up, down, left, right as (dx, dy); actions 0-3 move, 4-7 attack, 8 no-op
DIRECTIONS = ((0, -1), (0, 1), (-1, 0), (1, 0))
N_ACTIONS = 9
NOOP = 8

UTILITIES = {
    "move": -0.005,
    "kill_enemy": 5.0,
    "attack_enemy": 0.2,
    "attack_blank": -0.1,
    "attacked_or_killed": -0.1,
}


@dataclass(frozen=True)
class BattleConfig:
    width: int = 20
    height: int = 20
    team_size: int = 8
    max_ticks: int = 60
    view: int = 7
    hp: int = 2

    def __post_init__(self):
        if self.view % 2 != 1:
            raise ValueError("view window must have odd side length")
        if min(self.width, self.height, self.team_size, self.max_ticks, self.hp) < 1:
            raise ValueError("battle config values must be positive")
        if (self.width // 4) * self.height < self.team_size:
            raise ValueError("left-quarter spawn region too small for the team size")


@dataclass
class RewardEvent:
    kind: str
    agent_id: int  # unit id

    def __post_init__(self):
        if self.kind not in UTILITIES:
            raise ValueError(f"unknown reward event kind {self.kind!r}")


@dataclass
class Unit:
    uid: int
    team: int
    x: int
    y: int
    hp: int


@dataclass
class BattleState:
    config: BattleConfig
    units: dict[int, Unit] = field(default_factory=dict)  # alive units by uid
    tick: int = 0

    def occupancy(self) -> dict[tuple[int, int], int]:
        cells: dict[tuple[int, int], int] = {}
        for unit in self.units.values():
            key = (unit.x, unit.y)
            if key in cells:
                raise AssertionError(f"two units share cell {key}")
            cells[key] = unit.uid
        return cells

    def team_units(self, team: int) -> list[Unit]:
        return [u for u in self.units.values() if u.team == team]


def team_reward(events: list[RewardEvent]) -> float:
    """Sum of the per-event utilities; callers pass one team's events."""
    return float(sum(UTILITIES[e.kind] for e in events))


def _resolve_moves(state: BattleState, intents: dict[int, int]) -> list[RewardEvent]:
    """Apply simultaneous moves; returns move events for units that moved."""
    cfg = state.config
    targets: dict[int, tuple[int, int]] = {}
    for uid, action in intents.items():
        if action >= 4:
            continue
        unit = state.units[uid]
        dx, dy = DIRECTIONS[action]
        nx, ny = unit.x + dx, unit.y + dy
        if 0 <= nx < cfg.width and 0 <= ny < cfg.height:
            targets[uid] = (nx, ny)

    # contested targets cancel for everyone aiming at them
    counts: dict[tuple[int, int], int] = {}
    for cell in targets.values():
        counts[cell] = counts.get(cell, 0) + 1
    movers = {uid: cell for uid, cell in targets.items() if counts[cell] == 1}

    # moves blocked by units that end up staying cancel, to a fixpoint
    stationary = {(u.x, u.y) for uid, u in state.units.items() if uid not in movers}
    changed = True
    while changed:
        changed = False
        for uid in list(movers):
            if movers[uid] in stationary:
                unit = state.units[uid]
                stationary.add((unit.x, unit.y))
                del movers[uid]
                changed = True

    events = []
    for uid, (nx, ny) in movers.items():
        state.units[uid].x, state.units[uid].y = nx, ny
        events.append(RewardEvent("move", uid))
    return events


def _resolve_attacks(state: BattleState, intents: dict[int, int]) -> list[RewardEvent]:
    """Simultaneous attacks against the post-move snapshot."""
    cfg = state.config
    occupied = {(u.x, u.y): u.uid for u in state.units.values()}
    events: list[RewardEvent] = []
    hits: dict[int, list[int]] = {}

    for uid in sorted(intents):
        action = intents[uid]
        if not 4 <= action < 8:
            continue
        unit = state.units[uid]
        dx, dy = DIRECTIONS[action - 4]
        cell = (unit.x + dx, unit.y + dy)
        victim_uid = occupied.get(cell)  # out-of-bounds cells are never occupied
        if victim_uid is None:
            events.append(RewardEvent("attack_blank", uid))
            continue
        hits.setdefault(victim_uid, []).append(uid)
        if state.units[victim_uid].team != unit.team:
            events.append(RewardEvent("attack_enemy", uid))
        events.append(RewardEvent("attacked_or_killed", victim_uid))

    teams = {uid: u.team for uid, u in state.units.items()}  # pre-damage snapshot
    for victim_uid, attackers in hits.items():
        victim = state.units[victim_uid]
        victim.hp -= len(attackers)
        if victim.hp <= 0:
            enemy_hitters = [a for a in attackers if teams[a] != victim.team]
            if enemy_hitters:
                events.append(RewardEvent("kill_enemy", min(enemy_hitters)))
            del state.units[victim_uid]
    return events


def step_battle(
    state: BattleState, actions_a: np.ndarray, actions_b: np.ndarray,
    slots_a: list[int], slots_b: list[int],
) -> tuple[list[RewardEvent], bool]:
    """Advance one tick given both teams' per-slot actions.

    Dead slots' actions are ignored. Returns all reward events plus the
    done flag (one side eliminated or the tick limit reached).
    """
    for name, acts in (("A", actions_a), ("B", actions_b)):
        acts = np.asarray(acts)
        if acts.shape != (state.config.team_size,):
            raise ValueError(f"team {name} action vector has shape {acts.shape}")
        if ((acts < 0) | (acts >= N_ACTIONS)).any():
            raise ValueError(f"team {name} actions out of range: {acts}")

    intents = {}
    for slots, acts in ((slots_a, actions_a), (slots_b, actions_b)):
        for uid, action in zip(slots, acts):
            if uid in state.units:
                intents[uid] = int(action)

    events = _resolve_moves(state, intents)
    events.extend(_resolve_attacks(state, intents))
    state.tick += 1
    done = (
        not state.team_units(0)
        or not state.team_units(1)
        or state.tick >= state.config.max_ticks
    )
    return events, done


class BattleEnv:
    """Two-team battle exposed from team A's perspective.

    Team B is driven by `opponent_hook(env, rng)`, set to self-play or a
    scripted policy by the caller; the default opponent approaches and
    attacks. Observations are egocentric view x view windows with ally,
    enemy, and normalised-hp channels.
    """

    def __init__(self, config: BattleConfig | None = None,
                 opponent_hook: Callable | None = None):
        self.config = config or BattleConfig()
        hook = opponent_hook or scripted_opponent
        self.spec = EnvSpec(
            n_agents=self.config.team_size,
            n_actions=N_ACTIONS,
            obs_dim=self.config.view * self.config.view * 3,
            state_dim=100,
            max_len=self.config.max_ticks,
            name="battle",
            opponent_hook=hook,
        )
        self.opponent_hook = hook
        self.state: BattleState | None = None
        self.slots: dict[int, list[int]] = {}
        self.last_winner: int | None = None
        self._rng: np.random.Generator | None = None

    def reset(self, rng: np.random.Generator):
        """Mirrored placement: team A in the left quarter, team B its mirror."""
        cfg = self.config
        self._rng = rng
        cells = [(x, y) for x in range(cfg.width // 4) for y in range(cfg.height)]
        picks = rng.choice(len(cells), size=cfg.team_size, replace=False)
        units: dict[int, Unit] = {}
        for slot, pick in enumerate(picks):
            x, y = cells[int(pick)]
            units[slot] = Unit(uid=slot, team=0, x=x, y=y, hp=cfg.hp)
            mirror_uid = cfg.team_size + slot
            units[mirror_uid] = Unit(uid=mirror_uid, team=1, x=cfg.width - 1 - x, y=y, hp=cfg.hp)
        self.state = BattleState(config=cfg, units=units)
        self.last_winner = None
        self.slots = {
            0: list(range(cfg.team_size)),
            1: list(range(cfg.team_size, 2 * cfg.team_size)),
        }
        if hasattr(self.opponent_hook, "reset"):
            self.opponent_hook.reset(self)
        return self.observations(0), self.global_state()

    def step(self, actions) -> StepResult:
        actions_b = self.opponent_hook(self, self._rng)
        events, done = step_battle(self.state, np.asarray(actions), np.asarray(actions_b),
                                   self.slots[0], self.slots[1])
        uids_a = set(self.slots[0])
        reward_a = team_reward([e for e in events if e.agent_id in uids_a])
        reward_b = team_reward([e for e in events if e.agent_id not in uids_a])
        winner = None
        if done:
            alive_a, alive_b = bool(self.state.team_units(0)), bool(self.state.team_units(1))
            if alive_a and not alive_b:
                winner = 0
            elif alive_b and not alive_a:
                winner = 1
            self.last_winner = winner
        return StepResult(
            observations=self.observations(0),
            reward=reward_a,
            state=self.global_state(),
            done=done,
            info={"reward_b": reward_b, "winner": winner, "events": events,
                  "tick": self.state.tick},
        )

    def observations(self, team: int) -> np.ndarray:
        """Egocentric local windows for every slot of a team; dead slots are zero."""
        cfg = self.config
        half = cfg.view // 2
        ally_grid = np.zeros((cfg.width, cfg.height))
        enemy_grid = np.zeros((cfg.width, cfg.height))
        hp_grid = np.zeros((cfg.width, cfg.height))
        for unit in self.state.units.values():
            grid = ally_grid if unit.team == team else enemy_grid
            grid[unit.x, unit.y] = 1.0
            hp_grid[unit.x, unit.y] = unit.hp / cfg.hp

        obs = np.zeros((cfg.team_size, self.spec.obs_dim))
        padded = np.zeros((3, cfg.width + 2 * half, cfg.height + 2 * half))
        padded[0, half : half + cfg.width, half : half + cfg.height] = ally_grid
        padded[1, half : half + cfg.width, half : half + cfg.height] = enemy_grid
        padded[2, half : half + cfg.width, half : half + cfg.height] = hp_grid
        for i, uid in enumerate(self.slots[team]):
            unit = self.state.units.get(uid)
            if unit is None:
                continue
            window = padded[:, unit.x : unit.x + cfg.view, unit.y : unit.y + cfg.view].copy()
            window[0, half, half] = 0.0  # self is not an ally
            obs[i] = window.reshape(-1)
        return obs

    def global_state(self) -> np.ndarray:
        """Coarse 5x5 pooled per-team occupancy and hp map."""
        cfg = self.config
        pooled = np.zeros((4, 5, 5))
        for unit in self.state.units.values():
            bx = unit.x * 5 // cfg.width
            by = unit.y * 5 // cfg.height
            base = 0 if unit.team == 0 else 2
            pooled[base, bx, by] += 1.0 / cfg.team_size
            pooled[base + 1, bx, by] += unit.hp / (cfg.team_size * cfg.hp)
        return pooled.reshape(-1)


def scripted_opponent(env: BattleEnv, rng: np.random.Generator | None = None) -> np.ndarray:
    """Deterministic approach-and-attack policy for team B."""
    return scripted_team_actions(env, team=1)


def scripted_team_actions(env: BattleEnv, team: int) -> np.ndarray:
    """Attack an adjacent enemy if any, otherwise step toward the nearest one."""
    state = env.state
    actions = np.full(env.config.team_size, NOOP, dtype=np.int64)
    enemies = state.team_units(1 - team)
    if not enemies:
        return actions
    for i, uid in enumerate(env.slots[team]):
        unit = state.units.get(uid)
        if unit is None:
            continue
        target = min(enemies, key=lambda e: (abs(e.x - unit.x) + abs(e.y - unit.y), e.uid))
        dx, dy = target.x - unit.x, target.y - unit.y
        if abs(dx) + abs(dy) == 1:
            actions[i] = 4 + DIRECTIONS.index((int(np.sign(dx)), int(np.sign(dy))))
        elif abs(dx) >= abs(dy) and dx != 0:
            actions[i] = DIRECTIONS.index((int(np.sign(dx)), 0))
        elif dy != 0:
            actions[i] = DIRECTIONS.index((0, int(np.sign(dy))))
    return actions
