"""Differentiable particle-filter belief tracker.

Each agent carries a stack of weighted hidden-state particles. A transition
network advances particle hiddens from (previous hidden, previous action,
observation), a likelihood network rescores them against the observation,
a soft resample mixes the Bayes weights with a uniform floor so every
particle keeps positive weight, and a generator network maps the weighted
particle summary plus the observation to a fixed-size compressed
information state.

The tensor-level functions accept arbitrary leading batch axes: per-agent
shapes are (X, H)/(X,) and a stacked team uses (N, X, H)/(N, X) through the
same code path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import diffcore as dc
from .diffcore import Mlp, Tensor

WEIGHT_TOL = 1e-6
LIKELIHOOD_FLOOR = 1e-6
LIKELIHOOD_CEIL = 1e6


@dataclass(frozen=True)
class FilterConfig:
    """Tunable shapes and behaviour of the filter; defaults are invented."""

    particles: int = 16
    hidden_dim: int = 32
    kappa_dim: int = 32
    beta: float = 0.5
    net_width: int = 32
    likelihood_on_propagated: bool = False

    def __post_init__(self):
        if self.particles < 1:
            raise ValueError("need at least one particle")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")


@dataclass
class Particle:
    """Read-only view of one particle."""

    hidden: np.ndarray
    weight: float

    def __post_init__(self):
        if not np.isfinite(self.weight) or self.weight < 0:
            raise ValueError(f"particle weight must be finite and non-negative, got {self.weight}")


@dataclass
class Belief:
    """A stack of X weighted particles for one agent."""

    hidden: Tensor  # (X, H)
    weights: Tensor  # (X,)
    agent_id: int = 0

    def __post_init__(self):
        if self.hidden.ndim != 2 or self.weights.ndim != 1:
            raise ValueError(
                f"belief expects (X, H) hiddens and (X,) weights, got "
                f"{self.hidden.shape} and {self.weights.shape}"
            )
        if self.hidden.shape[0] != self.weights.shape[0] or self.weights.shape[0] < 1:
            raise ValueError("particle count mismatch or empty belief")
        total = float(self.weights.data.sum())
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValueError(f"belief weights must sum to 1 +/- {WEIGHT_TOL}, got {total}")

    @property
    def particles(self) -> list[Particle]:
        return [
            Particle(hidden=h.copy(), weight=float(w))
            for h, w in zip(self.hidden.data, self.weights.data)
        ]


@dataclass
class CompressedInfoState:
    """Fixed-size vector the policy networks consume."""

    kappa: Tensor

    def __post_init__(self):
        if not np.isfinite(self.kappa.data).all():
            raise ValueError("compressed information state contains non-finite entries")


@dataclass
class FilterNets:
    """Transition/likelihood/generator networks and their shared parameters."""

    transition: Mlp
    likelihood: Mlp
    generator: Mlp
    config: FilterConfig
    obs_dim: int
    n_actions: int

    @classmethod
    def create(cls, obs_dim: int, n_actions: int, config: FilterConfig,
               rng: np.random.Generator) -> "FilterNets":
        h, w, k = config.hidden_dim, config.net_width, config.kappa_dim
        return cls(
            transition=Mlp.create((h + n_actions + obs_dim, w, h), rng, "filter.T"),
            likelihood=Mlp.create((obs_dim + h, w, 1), rng, "filter.Z"),
            generator=Mlp.create((obs_dim + h + 1, w, k), rng, "filter.G"),
            config=config,
            obs_dim=obs_dim,
            n_actions=n_actions,
        )

    @property
    def params(self) -> list[Tensor]:
        return self.transition.params + self.likelihood.params + self.generator.params


def init_belief(b1_seed: np.ndarray | None, particles: int,
                hidden_dim: int | None = None, agent_id: int = 0) -> Belief:
    """All particles start at the encoded initial belief with uniform weights.

    Environments without an informative prior pass b1_seed=None and get the
    zero vector.
    """
    if particles < 1:
        raise ValueError(f"particle count must be >= 1, got {particles}")
    if b1_seed is None:
        if hidden_dim is None:
            raise ValueError("hidden_dim is required when no initial belief seed is given")
        seed = np.zeros(hidden_dim)
    else:
        seed = np.asarray(b1_seed, dtype=np.float64)
        if hidden_dim is not None and seed.shape != (hidden_dim,):
            raise ValueError(f"initial belief has shape {seed.shape}, expected ({hidden_dim},)")
    hidden = Tensor(np.tile(seed, (particles, 1)))
    weights = Tensor(np.full(particles, 1.0 / particles))
    return Belief(hidden=hidden, weights=weights, agent_id=agent_id)


def _per_particle(t: Tensor, particles: int) -> Tensor:
    """(..., D) -> (..., X, D) by repetition."""
    return dc.tile_new_axis(t, t.ndim - 1, particles)


# -- tensor-level operations (leading batch axes allowed) ----------------------


def propagate_hidden(nets: FilterNets, hidden: Tensor, prev_action: Tensor,
                     obs: Tensor) -> Tensor:
    """Advance every particle hidden through the transition network."""
    particles = hidden.shape[-2]
    stacked = dc.concat(
        [hidden, _per_particle(prev_action, particles), _per_particle(obs, particles)],
        axis=-1,
    )
    return nets.transition(stacked)


def likelihood_values(nets: FilterNets, obs: Tensor, hiddens: Tensor) -> Tensor:
    """Strictly positive per-particle observation likelihoods."""
    particles = hiddens.shape[-2]
    stacked = dc.concat([_per_particle(obs, particles), hiddens], axis=-1)
    raw = nets.likelihood(stacked)  # (..., X, 1)
    positive = dc.clip(dc.exp(raw), LIKELIHOOD_FLOOR, LIKELIHOOD_CEIL)
    out = dc.reshape(positive, positive.shape[:-1])
    if not np.isfinite(out.data).all():
        raise ValueError("likelihood network produced non-finite values")
    return out


def soft_resample(weights, likelihoods, beta: float) -> Tensor:
    """Differentiable reweighting mixing Bayes weights with a uniform floor.

    w'_x = (beta * L_x w_x + (1 - beta)/X) / (sum_j beta * L_j w_j + (1 - beta))
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    w = dc.as_tensor(weights)
    lik = dc.as_tensor(likelihoods)
    particles = w.shape[-1]
    total = w.data.sum(axis=-1)
    if not np.allclose(total, 1.0, atol=WEIGHT_TOL):
        raise ValueError("soft_resample input weights must sum to 1")
    bayes = dc.mul(lik, w)
    numer = dc.add(dc.mul(bayes, beta), (1.0 - beta) / particles)
    denom = dc.add(dc.mul(dc.summation(bayes, axis=-1, keepdims=True), beta), 1.0 - beta)
    return dc.div(numer, denom)


def particle_summary(hidden: Tensor, weights: Tensor) -> Tensor:
    """Weighted mean of particle hiddens concatenated with the weight entropy.

    Fixed-size, permutation-invariant, and differentiable; this is how a
    particle set enters the generator network.
    """
    expanded = dc.reshape(weights, weights.shape + (1,))
    mean_hidden = dc.summation(dc.mul(hidden, expanded), axis=-2)
    entropy = dc.neg(
        dc.summation(dc.mul(weights, dc.log(weights)), axis=-1, keepdims=True)
    )
    return dc.concat([mean_hidden, entropy], axis=-1)


def compress_state(nets: FilterNets, obs: Tensor, hidden: Tensor, weights: Tensor) -> Tensor:
    """Map observation plus weighted particle summary to the kappa vector."""
    return nets.generator(dc.concat([obs, particle_summary(hidden, weights)], axis=-1))


def belief_step(nets: FilterNets, hidden: Tensor, weights: Tensor, prev_action: Tensor,
                obs: Tensor, beta: float) -> tuple[Tensor, Tensor, Tensor]:
    """One full update: propagate, rescore, soft-resample, compress.

    Returns (kappa, new hiddens, new weights); shapes follow the inputs.
    """
    new_hidden = propagate_hidden(nets, hidden, prev_action, obs)
    scored = new_hidden if nets.config.likelihood_on_propagated else hidden
    lik = likelihood_values(nets, obs, scored)
    new_weights = soft_resample(weights, lik, beta)
    kappa = compress_state(nets, obs, new_hidden, new_weights)
    return kappa, new_hidden, new_weights


# -- spec-level per-agent wrappers ---------------------------------------------


def propagate(nets: FilterNets, belief: Belief, prev_action, obs) -> Tensor:
    return propagate_hidden(nets, belief.hidden, dc.as_tensor(prev_action), dc.as_tensor(obs))


def likelihoods(nets: FilterNets, obs, prev_hiddens: Tensor) -> Tensor:
    return likelihood_values(nets, dc.as_tensor(obs), prev_hiddens)


def compress(nets: FilterNets, obs, belief: Belief) -> CompressedInfoState:
    return CompressedInfoState(
        kappa=compress_state(nets, dc.as_tensor(obs), belief.hidden, belief.weights)
    )


def belief_update(nets: FilterNets, belief: Belief, prev_action, obs,
                  beta: float | None = None) -> tuple[CompressedInfoState, Belief]:
    """Algorithm-ordered composition returning (kappa, new belief)."""
    beta = nets.config.beta if beta is None else beta
    kappa, new_hidden, new_weights = belief_step(
        nets, belief.hidden, belief.weights, dc.as_tensor(prev_action), dc.as_tensor(obs), beta
    )
    return (
        CompressedInfoState(kappa=kappa),
        Belief(hidden=new_hidden, weights=new_weights, agent_id=belief.agent_id),
    )
