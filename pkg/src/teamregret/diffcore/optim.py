"""First-order optimizers: plain SGD and bias-corrected Adam."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor

KINDS = ("sgd", "adam")


@dataclass
class Optimizer:
    """Holds the update rule plus persistent per-parameter moment state."""

    kind: str
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    moments: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown optimizer kind {self.kind!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")


def _slot(opt: Optimizer, param: Tensor, index: int) -> dict[str, np.ndarray]:
    key = param.name or f"param{index}"
    state = opt.moments.get(key)
    if state is None:
        state = {"m": np.zeros_like(param.data), "v": np.zeros_like(param.data)}
        opt.moments[key] = state
    return state


def optimizer_step(opt: Optimizer, params: list[Tensor], grads: dict[Tensor, np.ndarray]) -> list[Tensor]:
    """Apply one in-place update. Raises on missing or non-finite gradients."""
    for i, p in enumerate(params):
        if p not in grads:
            raise ValueError(f"gradient missing for parameter {p.name or i}")
        if not np.isfinite(grads[p]).all():
            raise ValueError(f"non-finite gradient for parameter {p.name or i}")

    if opt.kind == "sgd":
        for p in params:
            p.data = p.data - opt.learning_rate * grads[p]
        return params

    opt.step_count += 1
    t = opt.step_count
    bc1 = 1.0 - opt.beta1**t
    bc2 = 1.0 - opt.beta2**t
    for i, p in enumerate(params):
        g = grads[p]
        state = _slot(opt, p, i)
        state["m"] = opt.beta1 * state["m"] + (1.0 - opt.beta1) * g
        state["v"] = opt.beta2 * state["v"] + (1.0 - opt.beta2) * (g * g)
        m_hat = state["m"] / bc1
        v_hat = state["v"] / bc2
        p.data = p.data - opt.learning_rate * m_hat / (np.sqrt(v_hat) + opt.epsilon)
    return params
