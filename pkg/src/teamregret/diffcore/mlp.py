"""Multilayer perceptron building blocks on top of the autodiff core."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .tensor import Tensor

ACTIVATIONS = ("tanh", "relu")
OUTPUT_ACTIVATIONS = ("none", "softmax", "sigmoid")


@dataclass(frozen=True)
class MlpSpec:
    """Shape and nonlinearity of a fully connected network."""

    layer_widths: tuple[int, ...]
    activation: str = "tanh"
    output_activation: str = "none"

    def __post_init__(self):
        if len(self.layer_widths) < 2:
            raise ValueError("MlpSpec needs at least input and output widths")
        if any(w < 1 for w in self.layer_widths):
            raise ValueError(f"layer widths must be positive, got {self.layer_widths}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"unknown output activation {self.output_activation!r}")

    @property
    def in_dim(self) -> int:
        return self.layer_widths[0]

    @property
    def out_dim(self) -> int:
        return self.layer_widths[-1]


def init_mlp_params(spec: MlpSpec, rng: np.random.Generator, name: str = "mlp") -> list[Tensor]:
    """Uniform(-sqrt(6/(fan_in+fan_out))) weights, zero biases, as [W0, b0, W1, b1, ...]."""
    params: list[Tensor] = []
    for i, (fan_in, fan_out) in enumerate(zip(spec.layer_widths, spec.layer_widths[1:])):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        params.append(Tensor(w, requires_grad=True, name=f"{name}.L{i}.W"))
        params.append(Tensor(np.zeros(fan_out), requires_grad=True, name=f"{name}.L{i}.b"))
    return params


def mlp_forward(spec: MlpSpec, params: list[Tensor], x) -> Tensor:
    """Run the network; input may carry arbitrary leading batch axes."""
    x = T.as_tensor(x)
    n_layers = len(spec.layer_widths) - 1
    if len(params) != 2 * n_layers:
        raise ValueError(
            f"expected {2 * n_layers} parameter tensors for {n_layers} layers, got {len(params)}"
        )
    if x.shape[-1] != spec.in_dim:
        raise ValueError(
            f"input width {x.shape[-1]} does not match layer 0 input width {spec.in_dim}"
        )
    h = x
    for i in range(n_layers):
        w, b = params[2 * i], params[2 * i + 1]
        if w.shape != (spec.layer_widths[i], spec.layer_widths[i + 1]):
            raise ValueError(
                f"layer {i} weight shape {w.shape} does not match spec "
                f"{(spec.layer_widths[i], spec.layer_widths[i + 1])}"
            )
        h = T.add(T.matmul(h, w), b)
        if i < n_layers - 1:
            h = T.tanh(h) if spec.activation == "tanh" else T.relu(h)
    if spec.output_activation == "softmax":
        h = T.softmax(h)
    elif spec.output_activation == "sigmoid":
        h = T.sigmoid(h)
    return h


@dataclass
class Mlp:
    """A spec bundled with its parameters; convenience for named sub-networks."""

    spec: MlpSpec
    params: list[Tensor] = field(default_factory=list)

    @classmethod
    def create(cls, widths, rng: np.random.Generator, name: str, activation: str = "tanh",
               output_activation: str = "none") -> "Mlp":
        spec = MlpSpec(tuple(widths), activation, output_activation)
        return cls(spec=spec, params=init_mlp_params(spec, rng, name=name))

    def __call__(self, x) -> Tensor:
        return mlp_forward(self.spec, self.params, x)

    def copy_frozen(self) -> "Mlp":
        """Deep copy whose parameters never receive gradients (target/lagged nets)."""
        frozen = [Tensor(p.data.copy(), requires_grad=False, name=p.name) for p in self.params]
        return Mlp(spec=self.spec, params=frozen)

    def load_from(self, other: "Mlp") -> None:
        for mine, theirs in zip(self.params, other.params):
            mine.data = theirs.data.copy()
