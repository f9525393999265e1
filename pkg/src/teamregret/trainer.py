"""Centralized training, decentralized execution.

The team-regret methods estimate per-action accumulated regret as
q(kappa)[a] - V(kappa) per agent, act greedily on the positive part, and
train two heads: the q network regresses the team-summed per-episode
increment against a lagged snapshot of itself plus the discounted target
value, and the V network regresses team-summed k-step advantages with an
optional action-independent global-state shaping term. The q loss stops
gradients at kappa; the V loss backpropagates through kappa into the
particle filter (when one is used).

Baselines reuse the same machinery: IQL is per-agent Q-learning on the team
reward with the lagged snapshot as its TD target, VDN sums per-agent Q
values inside one TD loss, and ARM runs the regret heads per agent without
team sums or shaping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import belief as bf
from . import diffcore as dc
from . import regret as rg
from .belief import FilterConfig, FilterNets
from .diffcore import Mlp, Optimizer, Tensor, optimizer_step

METHODS = ("vrm", "bvrm", "bvrm_shaping", "iql", "vdn", "arm")
REGRET_METHODS = ("vrm", "bvrm", "bvrm_shaping", "arm")


class TrainError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.99
    k: int = 4
    batch_episodes: int = 32
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_frac: float = 0.5
    snapshot_period: int = 1
    target_period: int = 100
    hidden_width: int = 64
    hidden_depth: int = 2
    select_mode: str = "greedy"
    q_target_form: str = "printed"  # "advantage" subtracts the lagged state value
    strict_paper_advantage: bool = False  # keep the printed gamma^{k+tau0+1} exponent
    concat_obs: bool = False
    freeze_filter: bool = False

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.k < 0:
            raise ValueError("advantage horizon k must be >= 0")
        if min(self.batch_episodes, self.snapshot_period, self.target_period,
               self.hidden_width, self.hidden_depth) < 1:
            raise ValueError("batch, periods, and net sizes must be positive")
        if not 0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0:
            raise ValueError("epsilon schedule must satisfy 0 <= end <= start <= 1")
        if self.q_target_form not in ("printed", "advantage"):
            raise ValueError(f"unknown q_target_form {self.q_target_form!r}")
        if self.select_mode not in rg.SELECT_MODES:
            raise ValueError(f"unknown select_mode {self.select_mode!r}")


@dataclass
class EpisodeTrace:
    """Everything one episode contributes to the losses."""

    observations: list[np.ndarray] = field(default_factory=list)
    kappas: list[Tensor] = field(default_factory=list)
    actions: list[np.ndarray] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    states: list[np.ndarray] = field(default_factory=list)
    dones: list[bool] = field(default_factory=list)
    episode_index: int = 0

    def __len__(self) -> int:
        return len(self.rewards)

    @property
    def episode_return(self) -> float:
        return float(sum(self.rewards))

    def append(self, obs, kappa, actions, reward, state, done):
        self.observations.append(obs)
        self.kappas.append(kappa)
        self.actions.append(np.asarray(actions, dtype=np.int64))
        self.rewards.append(float(reward))
        self.states.append(state)
        self.dones.append(bool(done))


@dataclass
class NetworkBundle:
    """All shared parameter groups plus the frozen snapshots."""

    method: str
    q_net: Mlp
    q_prev: Mlp
    v_net: Mlp
    v_target: Mlp
    shaping_net: Mlp
    filter_nets: FilterNets
    n_actions: int
    obs_dim: int
    state_dim: int
    kappa_in: int
    uses_filter: bool
    uses_shaping: bool

    @classmethod
    def create(cls, method: str, env_spec, config: TrainConfig,
               filter_config: FilterConfig, rng: np.random.Generator) -> "NetworkBundle":
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}")
        uses_filter = method in ("bvrm", "bvrm_shaping")
        uses_shaping = method == "bvrm_shaping"
        kappa_in = filter_config.kappa_dim if uses_filter else env_spec.obs_dim
        if uses_filter and config.concat_obs:
            kappa_in += env_spec.obs_dim
        hidden = (config.hidden_width,) * config.hidden_depth
        q_net = Mlp.create((kappa_in, *hidden, env_spec.n_actions), rng, "q")
        v_net = Mlp.create((kappa_in, *hidden, 1), rng, "v")
        shaping_net = Mlp.create((env_spec.state_dim, *hidden, 1), rng, "f")
        filter_nets = FilterNets.create(env_spec.obs_dim, env_spec.n_actions,
                                        filter_config, rng)
        return cls(
            method=method,
            q_net=q_net,
            q_prev=_frozen_copy(q_net, "q_prev"),
            v_net=v_net,
            v_target=_frozen_copy(v_net, "v_target"),
            shaping_net=shaping_net,
            filter_nets=filter_nets,
            n_actions=env_spec.n_actions,
            obs_dim=env_spec.obs_dim,
            state_dim=env_spec.state_dim,
            kappa_in=kappa_in,
            uses_filter=uses_filter,
            uses_shaping=uses_shaping,
        )

    def refresh_q_prev(self):
        self.q_prev.load_from(self.q_net)

    def refresh_v_target(self):
        self.v_target.load_from(self.v_net)

    def param_groups(self) -> dict[str, list[Tensor]]:
        return {
            "q": self.q_net.params,
            "q_prev": self.q_prev.params,
            "v": self.v_net.params,
            "v_target": self.v_target.params,
            "f": self.shaping_net.params,
            "filter": self.filter_nets.params,
        }

    def value_side_params(self, config: TrainConfig) -> list[Tensor]:
        """Parameters stepped by the V loss: theta, plus xi and lambda when used."""
        params = list(self.v_net.params)
        if self.uses_shaping:
            params += self.shaping_net.params
        if self.uses_filter and not config.freeze_filter:
            params += self.filter_nets.params
        return params


def _frozen_copy(net: Mlp, prefix: str) -> Mlp:
    frozen = net.copy_frozen()
    for p in frozen.params:
        p.name = p.name.replace(net.params[0].name.split(".")[0], prefix, 1)
    return frozen


def _one_hot(indices: np.ndarray, width: int) -> np.ndarray:
    out = np.zeros((len(indices), width))
    out[np.arange(len(indices)), indices] = 1.0
    return out


def argmax_action(values, epsilon: float, rng: np.random.Generator,
                  tie_break: str = "random") -> int:
    """Plain epsilon-greedy argmax (no positive clip) for the Q baselines."""
    vals = np.asarray(values, dtype=np.float64)
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(vals.size))
    ties = np.flatnonzero(vals == vals.max())
    if tie_break == "first" or ties.size == 1:
        return int(ties[0])
    return int(rng.choice(ties))


def _select_team_actions(bundle: NetworkBundle, kappa_values: np.ndarray, mode: str,
                         epsilon: float, rng: np.random.Generator,
                         select_mode: str) -> np.ndarray:
    """Decentralized selection: per agent, reads only its own kappa and the
    shared q/V heads. The global state never enters here."""
    tie = "first" if mode == "eval" else "random"
    with dc.no_grad():
        q_vals = bundle.q_net(Tensor(kappa_values)).data  # (N, A)
        if bundle.method in REGRET_METHODS:
            v_vals = bundle.v_net(Tensor(kappa_values)).data  # (N, 1)
            scores = q_vals - v_vals
        else:
            scores = q_vals
    actions = np.empty(kappa_values.shape[0], dtype=np.int64)
    for i in range(actions.size):
        if bundle.method in REGRET_METHODS:
            actions[i] = rg.select_action(scores[i], select_mode, epsilon, rng, tie_break=tie)
        else:
            actions[i] = argmax_action(scores[i], epsilon, rng, tie_break=tie)
    return actions


def rollout_episode(env, bundle: NetworkBundle, mode: str, rng: np.random.Generator,
                    epsilon: float = 0.0, config: TrainConfig | None = None,
                    episode_index: int = 0) -> EpisodeTrace:
    """Play one episode; in train mode the kappa graph is retained for BPTT."""
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be train or eval, got {mode!r}")
    config = config or TrainConfig()
    train_graph = mode == "train" and bundle.uses_filter
    eps = epsilon if mode == "train" else 0.0

    obs, state = env.reset(rng)
    n = env.spec.n_agents
    fcfg = bundle.filter_nets.config
    hidden = Tensor(np.zeros((n, fcfg.particles, fcfg.hidden_dim)))
    weights = Tensor(np.full((n, fcfg.particles), 1.0 / fcfg.particles))
    prev_actions = np.zeros((n, env.spec.n_actions))
    trace = EpisodeTrace(episode_index=episode_index)

    for _ in range(env.spec.max_len + 1):
        if bundle.uses_filter:
            if train_graph:
                kappa, hidden, weights = bf.belief_step(
                    bundle.filter_nets, hidden, weights,
                    Tensor(prev_actions), Tensor(obs), fcfg.beta)
            else:
                with dc.no_grad():
                    kappa, hidden, weights = bf.belief_step(
                        bundle.filter_nets, hidden, weights,
                        Tensor(prev_actions), Tensor(obs), fcfg.beta)
            if config.concat_obs:
                kappa = dc.concat([kappa, Tensor(obs)], axis=-1)
        else:
            kappa = Tensor(obs.copy())

        actions = _select_team_actions(bundle, kappa.data, mode, eps, rng,
                                       config.select_mode)
        result = env.step(actions)
        trace.append(obs, kappa, actions, result.reward, state, result.done)
        obs, state = result.observations, result.state
        prev_actions = _one_hot(actions, env.spec.n_actions)
        if result.done:
            return trace
    raise TrainError(f"episode exceeded max length {env.spec.max_len}")


class PolicyOpponent:
    """Battle opponent hook driving team B with a bundle's decentralized policy.

    Used for self-play (live bundle) and for frozen-checkpoint opponents.
    Keeps its own belief state and never builds gradient graphs.
    """

    def __init__(self, bundle: NetworkBundle, config: TrainConfig | None = None,
                 mode: str = "eval", seed: int = 0):
        self.bundle = bundle
        self.config = config or TrainConfig()
        self.mode = mode
        self.epsilon = 0.0
        self._rng = np.random.default_rng(seed)
        self._hidden = None
        self._weights = None
        self._prev_actions = None

    def reset(self, env):
        n = env.config.team_size
        fcfg = self.bundle.filter_nets.config
        self._hidden = Tensor(np.zeros((n, fcfg.particles, fcfg.hidden_dim)))
        self._weights = Tensor(np.full((n, fcfg.particles), 1.0 / fcfg.particles))
        self._prev_actions = np.zeros((n, env.spec.n_actions))

    def __call__(self, env, rng) -> np.ndarray:
        # shares the caller's rng stream so resumed runs stay bit-exact
        rng = rng if rng is not None else self._rng
        obs = env.observations(1)
        fcfg = self.bundle.filter_nets.config
        with dc.no_grad():
            if self.bundle.uses_filter:
                kappa, self._hidden, self._weights = bf.belief_step(
                    self.bundle.filter_nets, self._hidden, self._weights,
                    Tensor(self._prev_actions), Tensor(obs), fcfg.beta)
                kappa_values = kappa.data
                if self.config.concat_obs:
                    kappa_values = np.concatenate([kappa_values, obs], axis=-1)
            else:
                kappa_values = obs
        actions = _select_team_actions(self.bundle, kappa_values, self.mode,
                                       self.epsilon, rng, self.config.select_mode)
        self._prev_actions = _one_hot(actions, env.spec.n_actions)
        return actions


# -- advantages and losses ------------------------------------------------------


def _v_target_values(bundle: NetworkBundle, kappas: np.ndarray) -> np.ndarray:
    """(T, N) frozen state values on detached kappas."""
    with dc.no_grad():
        return bundle.v_target(Tensor(kappas)).data[..., 0]


def k_step_advantage(trace: EpisodeTrace, agent: int, tau0: int, k: int, gamma: float,
                     bundle: NetworkBundle, strict_paper: bool = False) -> float:
    """Discounted k-step return plus the bootstrapped frozen value.

    k truncates at the terminal step and the bootstrap term is dropped there.
    The bootstrap discount is gamma^(k+1); strict_paper restores the printed
    gamma^(k+tau0+1) exponent.
    """
    horizon = len(trace)
    if not 0 <= tau0 < horizon:
        raise ValueError(f"tau0={tau0} outside episode of length {horizon}")
    k_eff = min(k, horizon - 1 - tau0)
    total = sum(gamma**j * trace.rewards[tau0 + j] for j in range(k_eff + 1))
    boot_step = tau0 + k + 1
    if k_eff == k and boot_step <= horizon - 1:
        exponent = (k + tau0 + 1) if strict_paper else (k + 1)
        v = _v_target_values(bundle, trace.kappas[boot_step].data[agent][None, :])[0]
        total += gamma**exponent * float(v)
    return float(total)


def _advantage_matrix(trace: EpisodeTrace, k: int, gamma: float,
                      v_tgt: np.ndarray, strict_paper: bool) -> np.ndarray:
    """(T, N) advantages using precomputed frozen values for the whole episode."""
    horizon, n = v_tgt.shape
    out = np.zeros((horizon, n))
    rewards = np.asarray(trace.rewards)
    for tau0 in range(horizon):
        k_eff = min(k, horizon - 1 - tau0)
        discounts = gamma ** np.arange(k_eff + 1)
        ret = float(discounts @ rewards[tau0 : tau0 + k_eff + 1])
        out[tau0, :] = ret
        boot_step = tau0 + k + 1
        if k_eff == k and boot_step <= horizon - 1:
            exponent = (k + tau0 + 1) if strict_paper else (k + 1)
            out[tau0, :] += gamma**exponent * v_tgt[boot_step]
    return out


@dataclass
class _Batch:
    kappas_live: Tensor  # (T, N, Kin), graph-connected in train mode
    kappas_det: np.ndarray  # (T, N, Kin)
    next_kappas_det: np.ndarray  # (T, N, Kin), zero rows at terminal steps
    observations: np.ndarray  # (T, N, D)
    next_observations: np.ndarray  # (T, N, D), zero rows at terminal steps
    actions: np.ndarray  # (T, N)
    rewards: np.ndarray  # (T,)
    nonterminal: np.ndarray  # (T,) 1.0 where a successor step exists
    states: np.ndarray  # (T, S)
    advantages: np.ndarray  # (T, N)


def build_batch(traces: list[EpisodeTrace], bundle: NetworkBundle,
                config: TrainConfig) -> _Batch:
    if not traces:
        raise ValueError("empty batch of episode traces")
    live = [k for tr in traces for k in tr.kappas]
    kappas_live = dc.stack(live, axis=0)
    kappas_det = kappas_live.data.copy()

    next_rows, next_obs_rows, nonterm = [], [], []
    adv_blocks = []
    for tr in traces:
        det = np.stack([k.data for k in tr.kappas])
        obs = np.stack(tr.observations)
        v_tgt = _v_target_values(bundle, det)
        adv_blocks.append(
            _advantage_matrix(tr, config.k, config.gamma, v_tgt, config.strict_paper_advantage)
        )
        for tau0 in range(len(tr)):
            if tau0 + 1 <= len(tr) - 1:
                next_rows.append(det[tau0 + 1])
                next_obs_rows.append(obs[tau0 + 1])
                nonterm.append(1.0)
            else:
                next_rows.append(np.zeros_like(det[0]))
                next_obs_rows.append(np.zeros_like(obs[0]))
                nonterm.append(0.0)

    return _Batch(
        kappas_live=kappas_live,
        kappas_det=kappas_det,
        next_kappas_det=np.stack(next_rows),
        observations=np.concatenate([np.stack(tr.observations) for tr in traces]),
        next_observations=np.stack(next_obs_rows),
        actions=np.concatenate([np.stack(tr.actions) for tr in traces]),
        rewards=np.concatenate([np.asarray(tr.rewards) for tr in traces]),
        nonterminal=np.asarray(nonterm),
        states=np.concatenate([np.stack(tr.states) for tr in traces]),
        advantages=np.concatenate(adv_blocks),
    )


def loss_q(batch: _Batch, bundle: NetworkBundle, config: TrainConfig) -> Tensor:
    """Mean over (episode, step) of half the squared q-side residual.

    Gradients reach only the q parameters: kappas are detached and the
    lagged snapshot plus target values are frozen.
    """
    kappas = Tensor(batch.kappas_det)
    taken = bundle.q_net(kappas)  # (T, N, A)
    taken = dc.gather_last(taken, batch.actions)  # (T, N)

    with dc.no_grad():
        if bundle.method == "iql" or bundle.method == "vdn":
            next_q = bundle.q_prev(Tensor(batch.next_observations)).data  # (T, N, A)
            best_next = next_q.max(axis=-1) * batch.nonterminal[:, None]  # (T, N)
            if bundle.method == "iql":
                target = batch.rewards[:, None] + config.gamma * best_next  # (T, N)
            else:
                target = batch.rewards + config.gamma * best_next.sum(axis=-1)  # (T,)
        else:
            lagged = bundle.q_prev(kappas).data
            lagged = np.take_along_axis(
                lagged, batch.actions[..., None], axis=-1
            )[..., 0]  # (T, N)
            v_next = bundle.v_target(Tensor(batch.next_kappas_det)).data[..., 0]
            v_next = v_next * batch.nonterminal[:, None]  # (T, N)
            if config.q_target_form == "advantage":
                v_now = bundle.v_target(Tensor(batch.kappas_det)).data[..., 0]
            else:
                v_now = np.zeros_like(v_next)

    if bundle.method == "iql":
        residual = dc.sub(taken, Tensor(target))  # (T, N)
    elif bundle.method == "vdn":
        residual = dc.sub(dc.summation(taken, axis=-1), Tensor(target))  # (T,)
    elif bundle.method == "arm":
        const = lagged + config.gamma * v_next + batch.rewards[:, None] - v_now  # (T, N)
        residual = dc.sub(taken, Tensor(const))  # (T, N)
    else:
        const = (
            lagged.sum(axis=-1)
            + config.gamma * v_next.sum(axis=-1)
            + batch.rewards
            - v_now.sum(axis=-1)
        )  # (T,)
        residual = dc.sub(dc.summation(taken, axis=-1), Tensor(const))

    return dc.mul(dc.mean(dc.square(residual)), 0.5)


def loss_v(batch: _Batch, bundle: NetworkBundle, config: TrainConfig) -> Tensor:
    """Mean over (episode, step) of half the squared value-side residual.

    Gradients reach theta, xi (when shaping is on), and lambda through the
    live kappas (when a filter is used).
    """
    if bundle.method not in REGRET_METHODS:
        raise ValueError(f"method {bundle.method!r} has no value loss")
    values = bundle.v_net(batch.kappas_live)  # (T, N, 1)
    values = dc.reshape(values, values.shape[:-1])  # (T, N)

    if bundle.method == "arm":
        residual = dc.sub(Tensor(batch.advantages), values)  # (T, N)
    else:
        team_adv = Tensor(batch.advantages.sum(axis=-1))  # (T,)
        residual = dc.sub(team_adv, dc.summation(values, axis=-1))
        if bundle.uses_shaping:
            shaped = bundle.shaping_net(Tensor(batch.states))  # (T, 1)
            residual = dc.add(residual, dc.reshape(shaped, (shaped.shape[0],)))
    return dc.mul(dc.mean(dc.square(residual)), 0.5)


# -- the training loop -----------------------------------------------------------


@dataclass
class IterationMetrics:
    iteration: int
    loss_q: float
    loss_v: float | None
    grad_norm: float
    epsilon: float
    train_return_mean: float
    train_win_rate: float | None = None


class Trainer:
    """Owns the bundle, the optimizers, the epsilon schedule, and self-play."""

    def __init__(self, env, method: str, config: TrainConfig | None = None,
                 filter_config: FilterConfig | None = None, seed: int = 0,
                 total_iterations: int = 1000):
        self.env = env
        self.method = method
        self.config = config or TrainConfig()
        self.filter_config = filter_config or FilterConfig()
        self.seed = seed
        self.total_iterations = total_iterations
        self.rng = np.random.default_rng(seed)
        self.bundle = NetworkBundle.create(method, env.spec, self.config,
                                           self.filter_config, self.rng)
        self.opt_q = Optimizer(self.config.optimizer, self.config.learning_rate)
        self.opt_v = Optimizer(self.config.optimizer, self.config.learning_rate)
        self.iteration = 0
        self.episode_count = 0
        if env.spec.name == "battle":
            self.self_play_hook = PolicyOpponent(self.bundle, self.config, mode="train")
            env.opponent_hook = self.self_play_hook
        else:
            self.self_play_hook = None

    def epsilon(self, iteration: int | None = None) -> float:
        it = self.iteration if iteration is None else iteration
        cfg = self.config
        decay_iters = max(1, int(self.total_iterations * cfg.epsilon_decay_frac))
        frac = min(1.0, it / decay_iters)
        return cfg.epsilon_start + frac * (cfg.epsilon_end - cfg.epsilon_start)

    def run_iteration(self) -> IterationMetrics:
        eps = self.epsilon()
        if self.self_play_hook is not None:
            self.self_play_hook.epsilon = eps
        traces = []
        wins = []
        for _ in range(self.config.batch_episodes):
            trace = rollout_episode(self.env, self.bundle, "train", self.rng,
                                    epsilon=eps, config=self.config,
                                    episode_index=self.episode_count)
            self.episode_count += 1
            traces.append(trace)
        metrics = self.train_iteration(traces)
        metrics.epsilon = eps
        metrics.train_return_mean = float(np.mean([t.episode_return for t in traces]))
        return metrics

    def train_iteration(self, traces: list[EpisodeTrace]) -> IterationMetrics:
        """One optimizer step on the q side, one joint step on the value side."""
        if not traces:
            raise ValueError("train_iteration needs a non-empty trace buffer")
        self.iteration += 1
        batch = build_batch(traces, self.bundle, self.config)

        lq = loss_q(batch, self.bundle, self.config)
        if not np.isfinite(lq.data).all():
            raise TrainError(f"non-finite q loss at iteration {self.iteration}")
        grads = dc.backward(lq, self.bundle.q_net.params)
        norm_sq = sum(float((g * g).sum()) for g in grads.values())
        optimizer_step(self.opt_q, self.bundle.q_net.params, grads)

        lv_value = None
        if self.method in REGRET_METHODS:
            lv = loss_v(batch, self.bundle, self.config)
            if not np.isfinite(lv.data).all():
                raise TrainError(f"non-finite value loss at iteration {self.iteration}")
            params = self.bundle.value_side_params(self.config)
            grads_v = dc.backward(lv, params)
            norm_sq += sum(float((g * g).sum()) for g in grads_v.values())
            optimizer_step(self.opt_v, params, grads_v)
            lv_value = float(lv.data)

        if self.iteration % self.config.snapshot_period == 0:
            self.bundle.refresh_q_prev()
        if self.iteration % self.config.target_period == 0:
            self.bundle.refresh_v_target()

        return IterationMetrics(
            iteration=self.iteration,
            loss_q=float(lq.data),
            loss_v=lv_value,
            grad_norm=float(np.sqrt(norm_sq)),
            epsilon=0.0,
            train_return_mean=0.0,
        )

    def evaluate(self, episodes: int, rng: np.random.Generator,
                 opponent: "PolicyOpponent | str | None" = None) -> dict:
        """Deterministic-policy evaluation; battle wins count 1, draws 0.5."""
        from .envs.battle import scripted_opponent

        is_battle = self.env.spec.name == "battle"
        saved_hook = getattr(self.env, "opponent_hook", None)
        if is_battle:
            if opponent is None or opponent == "self":
                hook = PolicyOpponent(self.bundle, self.config, mode="eval")
            elif opponent == "scripted":
                hook = scripted_opponent
            else:
                hook = opponent
            self.env.opponent_hook = hook
        try:
            returns, scores = [], []
            for _ in range(episodes):
                trace = rollout_episode(self.env, self.bundle, "eval", rng,
                                        config=self.config)
                returns.append(trace.episode_return)
                if is_battle:
                    winner = self._last_winner
                    scores.append(1.0 if winner == 0 else 0.0 if winner == 1 else 0.5)
        finally:
            if is_battle:
                self.env.opponent_hook = saved_hook
        report = {
            "episodes": episodes,
            "mean_return": float(np.mean(returns)),
            "returns": returns,
            "win_rate": float(np.mean(scores)) if scores else None,
        }
        return report

    @property
    def _last_winner(self):
        return self.env.last_winner

    def train(self, iterations: int, callback=None) -> NetworkBundle:
        for _ in range(iterations):
            metrics = self.run_iteration()
            if callback is not None:
                callback(metrics)
        return self.bundle


def train_baseline(kind: str, env, config: TrainConfig | None = None,
                   filter_config: FilterConfig | None = None, seed: int = 0,
                   iterations: int = 100) -> NetworkBundle:
    """Train one of the comparison methods and return its bundle."""
    if kind not in METHODS:
        raise ValueError(f"unknown baseline kind {kind!r}")
    trainer = Trainer(env, kind, config, filter_config, seed=seed,
                      total_iterations=iterations)
    return trainer.train(iterations)


def assert_gradient_routing(bundle: NetworkBundle, traces: list[EpisodeTrace],
                            config: TrainConfig) -> None:
    """Probe check: the q loss must not touch theta/xi/lambda and the value
    loss must not touch omega."""
    batch = build_batch(traces, bundle, config)
    value_side = bundle.v_net.params + bundle.shaping_net.params + bundle.filter_nets.params
    grads = dc.backward(loss_q(batch, bundle, config),
                        bundle.q_net.params + value_side)
    for p in value_side:
        if np.any(grads[p] != 0.0):
            raise AssertionError(f"q loss leaked gradient into {p.name}")
    if bundle.method in REGRET_METHODS:
        grads = dc.backward(loss_v(batch, bundle, config),
                            bundle.q_net.params + value_side)
        for p in bundle.q_net.params:
            if np.any(grads[p] != 0.0):
                raise AssertionError(f"value loss leaked gradient into {p.name}")
