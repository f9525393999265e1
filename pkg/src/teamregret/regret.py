"""Team-regret accounting.

Accumulated-regret recursion over a tabular map, regret-based action
selection (greedy and regret matching over positively clipped regrets),
the additive and shaping team decompositions, and an exhaustive
joint-enumeration consistency checker for the decomposition guarantees.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Mapping

import numpy as np

SELECT_MODES = ("greedy", "regret_matching")


def positive_clip(x):
    """max(0, x), elementwise on arrays."""
    return np.maximum(0.0, x)


def select_action(
    regrets,
    mode: str = "greedy",
    epsilon: float = 0.0,
    rng: np.random.Generator | None = None,
    tie_break: str = "random",
) -> int:
    """Pick an action index from a vector of accumulated regrets.

    greedy: argmax of the clipped regrets; uniform random when no regret is
    positive. regret_matching: sample proportionally to clipped regrets;
    uniform when none is positive. With probability `epsilon` a uniform
    action is taken instead (training exploration). Evaluation callers use
    epsilon=0 and tie_break="first" for reproducibility.
    """
    values = np.asarray(regrets, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise ValueError(f"regret vector must be non-empty 1-D, got shape {values.shape}")
    if not np.isfinite(values).all():
        raise ValueError("regret vector contains non-finite entries")
    if mode not in SELECT_MODES:
        raise ValueError(f"unknown selection mode {mode!r}")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    if rng is None:
        rng = np.random.default_rng()

    n = values.size
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(n))

    clipped = positive_clip(values)
    top = clipped.max()
    if top <= 0.0:
        return int(rng.integers(n))

    if mode == "regret_matching":
        return int(rng.choice(n, p=clipped / clipped.sum()))

    ties = np.flatnonzero(clipped == top)
    if tie_break == "first" or ties.size == 1:
        return int(ties[0])
    return int(rng.choice(ties))


def team_regret_additive(per_agent_q, per_agent_v) -> float:
    """Team regret under the additive decomposition: sum(q) - sum(v)."""
    q = np.asarray(per_agent_q, dtype=np.float64)
    v = np.asarray(per_agent_v, dtype=np.float64)
    if q.shape != v.shape:
        raise ValueError(f"per-agent vectors differ in shape: {q.shape} vs {v.shape}")
    return float(q.sum() - v.sum())


def team_regret_shaped(per_agent_regret, shaping: float) -> float:
    """Team regret with a global-state shaping term: sum(regret_i) + c(s)."""
    reg = np.asarray(per_agent_regret, dtype=np.float64)
    return float(reg.sum() + shaping)


@dataclass(frozen=True)
class InfoStateKey:
    """Canonical per-agent information state for tabular mode."""

    agent_id: int
    history: tuple

    def __post_init__(self):
        if self.agent_id < 0:
            raise ValueError("agent_id must be non-negative")


@dataclass
class ShapingValue:
    """An action-independent real shaping value derived from the global state."""

    value: float


@dataclass
class RegretTable:
    """Map (info state, action) -> accumulated regret, plus an episode counter."""

    entries: dict[tuple[Hashable, int], float] = field(default_factory=dict)
    episode_count: int = 0

    def regrets(self, key: Hashable, n_actions: int) -> np.ndarray:
        return np.array([self.entries.get((key, a), 0.0) for a in range(n_actions)])


def tabular_update(
    table: RegretTable,
    q_t: Mapping[tuple[Hashable, int], float],
    v_t: Mapping[Hashable, float],
) -> RegretTable:
    """One episode of the accumulated-regret recursion.

    Every (key, action) visited this episode receives exactly one increment
    q_t(key, action) - v_t(key).
    """
    for (key, action), q_value in q_t.items():
        if key not in v_t:
            raise ValueError(f"no state value supplied for visited info state {key!r}")
        entry = (key, action)
        increment = q_value - v_t[key]
        table.entries[entry] = table.entries.get(entry, 0.0) + increment
    table.episode_count += 1
    return table


# -- consistency between joint and per-agent selection ------------------------


@dataclass
class ConsistencyReport:
    agents: int
    actions: int
    trials: int
    violations: int

    def __str__(self) -> str:
        status = "OK" if self.violations == 0 else "VIOLATED"
        return (
            f"consistency {status}: agents={self.agents} actions={self.actions} "
            f"trials={self.trials} violations={self.violations}"
        )


def _joint_sum(regrets: np.ndarray) -> np.ndarray:
    """(trials, N, A) per-agent regrets -> (trials, A, A, ..., A) joint sums."""
    trials, n_agents, n_actions = regrets.shape
    total = np.zeros((trials,) + (1,) * n_agents)
    for i in range(n_agents):
        shape = [trials] + [1] * n_agents
        shape[1 + i] = n_actions
        total = total + regrets[:, i, :].reshape(shape)
    return total


def consistency_check(
    n_agents: int,
    n_actions: int,
    trials: int,
    rng: np.random.Generator,
    chunk: int = 1000,
) -> ConsistencyReport:
    """Empirically verify that the decomposed team argmax matches the tuple of
    per-agent clipped argmaxes, for the additive form and for shaping with a
    random action-independent offset.

    Each trial draws per-agent regret vectors conditioned on every agent
    having at least one strictly positive regret, then enumerates all joint
    actions exhaustively as the oracle.
    """
    if trials <= 0:
        raise ValueError("trials must be positive")
    if n_agents < 1 or n_actions < 1:
        raise ValueError("need at least one agent and one action")

    violations = 0
    done = 0
    while done < trials:
        batch = min(chunk, trials - done)
        regrets = rng.uniform(-1.0, 1.0, size=(batch, n_agents, n_actions))
        # precondition: every agent has a strictly positive regret somewhere
        for _ in range(64):
            bad = ~(regrets.max(axis=2) > 0.0)
            if not bad.any():
                break
            regrets[bad] = rng.uniform(-1.0, 1.0, size=(int(bad.sum()), n_actions))

        per_agent = positive_clip(regrets).argmax(axis=2)  # (batch, N)

        joint = _joint_sum(regrets)
        flat = joint.reshape(batch, -1)
        shaping = rng.uniform(-1.0, 1.0, size=(batch,) + (1,) * n_agents)
        flat_shaped = (joint + shaping).reshape(batch, -1)

        for name, candidates in (("additive", flat), ("shaped", flat_shaped)):
            winners = np.array(
                np.unravel_index(candidates.argmax(axis=1), (n_actions,) * n_agents)
            ).T  # (batch, N)
            violations += int((winners != per_agent).any(axis=1).sum())

        done += batch

    return ConsistencyReport(agents=n_agents, actions=n_actions, trials=trials, violations=violations)


# -- exact tabular oracle on a two-step payoff tensor --------------------------


def _policy_from_regrets(reg: np.ndarray, epsilon: float) -> np.ndarray:
    """Distribution of the epsilon-greedy positive-clip policy."""
    clipped = positive_clip(reg)
    top = clipped.max()
    if top <= 0.0:
        greedy = np.full(reg.size, 1.0 / reg.size)
    else:
        ties = clipped == top
        greedy = ties / ties.sum()
    return (1.0 - epsilon) * greedy + epsilon / reg.size


def exact_selfplay_matrix(
    payoffs: np.ndarray,
    episodes: int,
    epsilon: float = 0.02,
) -> tuple[float, RegretTable, RegretTable]:
    """Run the accumulated-regret recursion on a two-step matrix game with
    exact counterfactual values (full expectation over the joint policy).

    This is the memory-exact reference dynamics that the network trainer
    approximates. Returns the greedy-evaluation payoff after `episodes`
    updates plus both agents' tables.
    """
    p = np.asarray(payoffs, dtype=np.float64)
    if p.shape != (2, 2, 2, 2):
        raise ValueError(f"expected a 2x2x2x2 payoff tensor, got {p.shape}")

    tables = [RegretTable(), RegretTable()]
    s1 = "s1"
    s2 = [("s2", 0), ("s2", 1)]

    for _ in range(episodes):
        pol1_s1 = _policy_from_regrets(tables[0].regrets(s1, 2), epsilon)
        pol2_s1 = _policy_from_regrets(tables[1].regrets(s1, 2), epsilon)
        pol1_s2 = [_policy_from_regrets(tables[0].regrets(s2[c], 2), epsilon) for c in range(2)]
        pol2_s2 = [_policy_from_regrets(tables[1].regrets(s2[c], 2), epsilon) for c in range(2)]

        q_maps = [{}, {}]
        v_maps = [{}, {}]
        # second step: Q_i((c_i), d_i) marginalises the opponent's first and
        # second choices under its current policy
        for agent, (own_s1, opp_s1, own_s2, opp_s2) in enumerate(
            ((pol1_s1, pol2_s1, pol1_s2, pol2_s2), (pol2_s1, pol1_s1, pol2_s2, pol1_s2))
        ):
            for c_own in range(2):
                q_vals = np.zeros(2)
                for d_own in range(2):
                    total = 0.0
                    for c_opp in range(2):
                        for d_opp in range(2):
                            pay = p[c_own, c_opp, d_own, d_opp] if agent == 0 else p[c_opp, c_own, d_opp, d_own]
                            total += opp_s1[c_opp] * opp_s2[c_opp][d_opp] * pay
                    q_vals[d_own] = total
                key = s2[c_own]
                for d_own in range(2):
                    q_maps[agent][(key, d_own)] = q_vals[d_own]
                v_maps[agent][key] = float(own_s2[c_own] @ q_vals)

            # first step: expectation over both second-step policies
            q_vals = np.zeros(2)
            for c_own in range(2):
                total = 0.0
                for c_opp in range(2):
                    for d_own in range(2):
                        for d_opp in range(2):
                            pay = p[c_own, c_opp, d_own, d_opp] if agent == 0 else p[c_opp, c_own, d_opp, d_own]
                            total += (
                                opp_s1[c_opp]
                                * own_s2[c_own][d_own]
                                * opp_s2[c_opp][d_opp]
                                * pay
                            )
                q_vals[c_own] = total
            for c_own in range(2):
                q_maps[agent][(s1, c_own)] = q_vals[c_own]
            v_maps[agent][s1] = float((pol1_s1 if agent == 0 else pol2_s1) @ q_vals)

        for agent in range(2):
            tabular_update(tables[agent], q_maps[agent], v_maps[agent])

    c1 = int(positive_clip(tables[0].regrets(s1, 2)).argmax())
    c2 = int(positive_clip(tables[1].regrets(s1, 2)).argmax())
    d1 = int(positive_clip(tables[0].regrets(s2[c1], 2)).argmax())
    d2 = int(positive_clip(tables[1].regrets(s2[c2], 2)).argmax())
    return float(p[c1, c2, d1, d2]), tables[0], tables[1]
