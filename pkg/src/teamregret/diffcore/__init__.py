"""Autodiff core: tensors, MLPs, optimizers, checkpoint codec."""

from .tensor import (
    GradCheckReport,
    Tensor,
    add,
    as_tensor,
    backward,
    clip,
    concat,
    div,
    exp,
    gather_last,
    grad_check,
    log,
    matmul,
    mean,
    mul,
    neg,
    no_grad,
    relu,
    reshape,
    sigmoid,
    softmax,
    square,
    stack,
    sub,
    summation,
    tanh,
    tile_new_axis,
)
from .mlp import Mlp, MlpSpec, init_mlp_params, mlp_forward
from .optim import Optimizer, optimizer_step
from .checkpoint import CheckpointError, read_checkpoint, write_checkpoint

__all__ = [
    "GradCheckReport",
    "Tensor",
    "add",
    "as_tensor",
    "backward",
    "clip",
    "concat",
    "div",
    "exp",
    "gather_last",
    "grad_check",
    "log",
    "matmul",
    "mean",
    "mul",
    "neg",
    "no_grad",
    "relu",
    "reshape",
    "sigmoid",
    "softmax",
    "square",
    "stack",
    "sub",
    "summation",
    "tanh",
    "tile_new_axis",
    "Mlp",
    "MlpSpec",
    "init_mlp_params",
    "mlp_forward",
    "Optimizer",
    "optimizer_step",
    "CheckpointError",
    "read_checkpoint",
    "write_checkpoint",
]
