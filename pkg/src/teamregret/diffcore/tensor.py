"""Reverse-mode automatic differentiation over dense float64 numpy arrays.

Supports exactly the operations the rest of the package needs: affine maps,
tanh/relu/sigmoid/exp/log, softmax, elementwise arithmetic, sum/mean,
square, clipping, concatenation/stacking/reshaping, tiling over a particle
axis, and gathering along the last axis. Graphs are built eagerly and are
single-threaded.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

_GRAD_ENABLED = True


class no_grad:
    """Context manager that disables graph recording (evaluation rollouts)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


class Tensor:
    """A dense float64 array plus the graph edge that produced it."""

    __slots__ = ("data", "requires_grad", "name", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._vjp: Callable[[np.ndarray], tuple[np.ndarray, ...]] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _fail_scalar(self)

    def detach(self) -> "Tensor":
        """A graph-free leaf sharing no autodiff history (data is copied)."""
        return Tensor(self.data.copy(), requires_grad=False, name=self.name)

    # -- operator sugar --------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"


def _fail_scalar(t: Tensor):
    raise ValueError(f"expected a scalar tensor, got shape {t.shape}")


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _node(data: np.ndarray, parents: tuple[Tensor, ...], vjp) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._vjp = vjp
    return out


# -- elementwise arithmetic ----------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _node(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _node(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _node(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _node(
        a.data / b.data,
        (a, b),
        lambda g: (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        ),
    )


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _node(-a.data, (a,), lambda g: (-g,))


# -- nonlinearities --------------------------------------------------------

def tanh(a) -> Tensor:
    a = as_tensor(a)
    y = np.tanh(a.data)
    return _node(y, (a,), lambda g: (g * (1.0 - y * y),))


def relu(a) -> Tensor:
    """max(0, x); the subgradient at the kink is 0."""
    a = as_tensor(a)
    mask = a.data > 0.0
    return _node(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    y = 1.0 / (1.0 + np.exp(-a.data))
    return _node(y, (a,), lambda g: (g * y * (1.0 - y),))


def exp(a) -> Tensor:
    a = as_tensor(a)
    y = np.exp(a.data)
    return _node(y, (a,), lambda g: (g * y,))


def log(a) -> Tensor:
    a = as_tensor(a)
    return _node(np.log(a.data), (a,), lambda g: (g / a.data,))


def square(a) -> Tensor:
    a = as_tensor(a)
    return _node(a.data * a.data, (a,), lambda g: (2.0 * g * a.data,))


def clip(a, lo: float, hi: float) -> Tensor:
    """Clamp to [lo, hi]; zero gradient outside the open interval."""
    a = as_tensor(a)
    mask = (a.data > lo) & (a.data < hi)
    return _node(np.clip(a.data, lo, hi), (a,), lambda g: (g * mask,))


def softmax(a) -> Tensor:
    """Softmax over the last axis, numerically stabilised."""
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def vjp(g):
        dot = (g * y).sum(axis=-1, keepdims=True)
        return (y * (g - dot),)

    return _node(y, (a,), vjp)


# -- linear algebra ---------------------------------------------------------

def matmul(x, w) -> Tensor:
    """x @ w with w a 2-D parameter matrix; x may carry leading batch axes."""
    x, w = as_tensor(x), as_tensor(w)
    if w.ndim != 2:
        raise ValueError(f"matmul expects a 2-D right operand, got shape {w.shape}")
    if x.shape[-1] != w.shape[0]:
        raise ValueError(f"matmul shape mismatch: {x.shape} @ {w.shape}")
    y = x.data @ w.data

    def vjp(g):
        if x.ndim == 1:
            gx = w.data @ g
            gw = np.outer(x.data, g)
        else:
            gx = g @ w.data.T
            flat_x = x.data.reshape(-1, x.shape[-1])
            flat_g = g.reshape(-1, w.shape[1])
            gw = flat_x.T @ flat_g
        return gx, gw

    return _node(y, (x, w), vjp)


# -- reductions ---------------------------------------------------------------

def summation(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    y = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.shape).copy(),)

    return _node(y, (a,), vjp)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    if axis is None:
        count = a.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        count = int(np.prod([a.shape[ax] for ax in axes]))
    return div(summation(a, axis=axis, keepdims=keepdims), float(count))


# -- shape plumbing -----------------------------------------------------------

def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.shape
    return _node(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    sizes = [p.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return _node(np.concatenate([p.data for p in parts], axis=axis), tuple(parts), vjp)


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    parts = [as_tensor(t) for t in tensors]

    def vjp(g):
        return tuple(np.moveaxis(g, axis, 0)[i] for i in range(len(parts)))

    return _node(np.stack([p.data for p in parts], axis=axis), tuple(parts), vjp)


def tile_new_axis(a, axis: int, reps: int) -> Tensor:
    """Insert a new axis of length `reps` by repetition (e.g. per-particle copies)."""
    a = as_tensor(a)
    y = np.repeat(np.expand_dims(a.data, axis), reps, axis=axis)
    return _node(y, (a,), lambda g: (g.sum(axis=axis),))


def gather_last(a, index: np.ndarray) -> Tensor:
    """Pick one entry along the last axis per leading position."""
    a = as_tensor(a)
    idx = np.asarray(index, dtype=np.int64)
    if idx.shape != a.shape[:-1]:
        raise ValueError(f"gather index shape {idx.shape} does not match {a.shape[:-1]}")
    expanded = np.expand_dims(idx, -1)
    y = np.take_along_axis(a.data, expanded, axis=-1).squeeze(-1)

    def vjp(g):
        out = np.zeros_like(a.data)
        np.put_along_axis(out, expanded, np.expand_dims(g, -1), axis=-1)
        return (out,)

    return _node(y, (a,), vjp)


# -- backward pass -------------------------------------------------------------

def backward(loss: Tensor, params: Iterable[Tensor] | None = None) -> dict[Tensor, np.ndarray]:
    """Backpropagate from a scalar loss.

    Returns a map from tensor to gradient for every requires_grad tensor
    reached from `loss`. When `params` is given, the map is restricted to
    them and unreachable parameters get zero gradients.
    """
    if loss.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.shape}")
    if not np.isfinite(loss.data).all():
        raise ValueError("backward called on a non-finite loss")

    topo: list[Tensor] = []
    seen: set[int] = set()
    stack_: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack_:
        node, expanded = stack_.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack_.append((parent, False))

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    by_id: dict[int, Tensor] = {id(loss): loss}
    for node in reversed(topo):
        g = grads.get(id(node))
        if g is None or node._vjp is None:
            continue
        for parent, pg in zip(node._parents, node._vjp(g)):
            if not parent.requires_grad:
                continue
            key = id(parent)
            by_id[key] = parent
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg

    result = {by_id[k]: v for k, v in grads.items() if by_id[k]._vjp is None}
    if params is not None:
        return {p: result.get(p, np.zeros_like(p.data)) for p in params}
    return result


# -- finite-difference verification ---------------------------------------------

@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_param: str
    worst_index: int
    coords_checked: int


def _rel_error(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(a), abs(b))


def grad_check(
    f: Callable[[], Tensor],
    params: Sequence[Tensor],
    step: float = 1e-5,
    max_coords: int = 256,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """Compare analytic gradients of f() against central finite differences.

    Checks every coordinate, or a uniform subsample of `max_coords` when the
    parameter vector is larger. f must be a deterministic closure over
    `params`.
    """
    if step <= 0:
        raise ValueError("grad_check step must be positive")
    loss = f()
    if not np.isfinite(loss.data).all():
        raise ValueError("grad_check: loss is not finite")
    analytic = backward(loss, params)

    coords = [(pi, ci) for pi, p in enumerate(params) for ci in range(p.size)]
    if len(coords) > max_coords:
        rng = rng or np.random.default_rng(0)
        picks = rng.choice(len(coords), size=max_coords, replace=False)
        coords = [coords[int(i)] for i in picks]

    worst = (0.0, "", -1)
    for pi, ci in coords:
        p = params[pi]
        flat = p.data.reshape(-1)
        keep = flat[ci]
        flat[ci] = keep + step
        hi = float(f().data)
        flat[ci] = keep - step
        lo = float(f().data)
        flat[ci] = keep
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise ValueError("grad_check: perturbed loss is not finite")
        fd = (hi - lo) / (2.0 * step)
        an = float(analytic[p].reshape(-1)[ci])
        err = _rel_error(fd, an)
        if err > worst[0]:
            worst = (err, p.name or f"param{pi}", ci)

    return GradCheckReport(
        max_rel_error=worst[0],
        worst_param=worst[1],
        worst_index=worst[2],
        coords_checked=len(coords),
    )
