"""Minimal reverse-mode automatic differentiation on numpy arrays.

Every op builds a node holding its output array, its parents and a closure
mapping the output gradient to one gradient per parent. ``backward`` walks
the graph once in reverse topological order.

Arrays are float32 unless a different precision is selected with
:func:`precision` (gradient checks run in float64 so that finite
differences are meaningful).
"""

from __future__ import annotations

import logging
from contextlib import contextmanager
from typing import Callable, Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

NEG_INF = -1e9
BCE_EPS = 1e-7

_state = {"dtype": np.float32, "grad": True}


def get_dtype():
    return _state["dtype"]


@contextmanager
def precision(dtype):
    """Temporarily switch the dtype used for newly created tensors."""
    old = _state["dtype"]
    _state["dtype"] = np.dtype(dtype).type
    try:
        yield
    finally:
        _state["dtype"] = old


@contextmanager
def no_grad():
    """Disable graph construction (evaluation rollouts)."""
    old = _state["grad"]
    _state["grad"] = False
    try:
        yield
    finally:
        _state["grad"] = old


def grad_enabled() -> bool:
    return _state["grad"]


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data, dtype=_state["dtype"])
        self.data = arr
        self.grad = np.zeros_like(arr) if requires_grad else None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward: Callable | None = None
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        if self.grad is not None:
            self.grad[...] = 0

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def backward(self):
        backward(self)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag})"

    # operator sugar
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

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data: np.ndarray, parents: Sequence[Tensor], backward_fn: Callable) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    if _state["grad"] and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    else:
        out.requires_grad = False
        out._parents = ()
        out._backward = None
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _check_broadcast(a: Tensor, b: Tensor, op: str):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------- graph walk


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor):
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every reachable leaf."""
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    order = _topo_order(loss)
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad += g
            continue
        parent_grads = node._backward(g)
        for p, pg in zip(node._parents, parent_grads):
            if pg is None or not p.requires_grad:
                continue
            key = id(p)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg


def zero_grad(params: Iterable[Tensor]):
    for p in params:
        p.zero_grad()


# ---------------------------------------------------------------- elementwise


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")
    sa, sb = a.shape, b.shape
    return _node(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")
    sa, sb = a.shape, b.shape
    return _node(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")
    ad, bd = a.data, b.data

    def bw(g):
        return (
            _unbroadcast(g * bd, ad.shape) if a.requires_grad else None,
            _unbroadcast(g * ad, bd.shape) if b.requires_grad else None,
        )

    return _node(ad * bd, (a, b), bw)


def elementwise(kind: str, *args) -> Tensor:
    """Dispatch helper: ``kind`` in {tanh, sigmoid, add, mul}."""
    fns = {"tanh": tanh, "sigmoid": sigmoid, "add": add, "mul": mul}
    if kind not in fns:
        raise ValueError(f"unknown elementwise kind {kind!r}")
    if kind in ("add", "mul"):
        a, b = (as_tensor(x) for x in args)
        if a.shape != b.shape:
            raise ValueError(f"{kind}: shape mismatch {a.shape} vs {b.shape}")
    return fns[kind](*args)


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return _node(y, (x,), lambda g: (g * (1 - y * y),))


def sigmoid(x: Tensor) -> Tensor:
    y = 0.5 * (1 + np.tanh(0.5 * x.data))
    return _node(y, (x,), lambda g: (g * y * (1 - y),))


def relu(x: Tensor) -> Tensor:
    pos = x.data > 0
    return _node(x.data * pos, (x,), lambda g: (g * pos,))


_GELU_C = float(np.sqrt(2.0 / np.pi))


def gelu(x: Tensor) -> Tensor:
    """Tanh approximation of GELU, as in BERT."""
    xd = x.data
    x2 = xd * xd
    inner = _GELU_C * (xd + 0.044715 * x2 * xd)
    t = np.tanh(inner)
    y = 0.5 * xd * (1 + t)

    def bw(g):
        dinner = _GELU_C * (1 + 3 * 0.044715 * x2)
        return (g * (0.5 * (1 + t) + 0.5 * xd * (1 - t * t) * dinner),)

    return _node(y, (x,), bw)


def exp(x: Tensor) -> Tensor:
    y = np.exp(x.data)
    return _node(y, (x,), lambda g: (g * y,))


def log(x: Tensor) -> Tensor:
    xd = x.data
    return _node(np.log(xd), (x,), lambda g: (g / xd,))


def square(x: Tensor) -> Tensor:
    xd = x.data
    return _node(xd * xd, (x,), lambda g: (2 * g * xd,))


# ---------------------------------------------------------------- linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """(..., m, k) @ (..., k, n); a 2-D right operand is shared across batch dims."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError(f"matmul needs >=2-D operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul: inner extents differ, {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data

    def bw(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(np.matmul(g, np.swapaxes(bd, -1, -2)), ad.shape)
        if b.requires_grad:
            if bd.ndim == 2 and ad.ndim > 2:
                gb = ad.reshape(-1, ad.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            else:
                gb = _unbroadcast(np.matmul(np.swapaxes(ad, -1, -2), g), bd.shape)
        return ga, gb

    return _node(np.matmul(ad, bd), (a, b), bw)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """x @ weight + bias with weight shaped (din, dout)."""
    if x.shape[-1] != weight.shape[0]:
        raise ValueError(f"linear: input extent {x.shape[-1]} != weight input extent {weight.shape[0]}")
    xd, wd = x.data, weight.data
    lead = xd.shape[:-1]
    x2 = xd.reshape(-1, xd.shape[-1])
    y = x2 @ wd
    if bias is not None:
        y = y + bias.data
    y = y.reshape(*lead, wd.shape[1])

    def bw(g):
        g2 = g.reshape(-1, g.shape[-1])
        gx = (g2 @ wd.T).reshape(xd.shape) if x.requires_grad else None
        gw = x2.T @ g2 if weight.requires_grad else None
        if bias is None:
            return gx, gw
        return gx, gw, g2.sum(axis=0)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _node(y, parents, bw)


# ---------------------------------------------------------------- shape ops


def reshape(x: Tensor, shape) -> Tensor:
    old = x.shape
    return _node(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),))


def transpose(x: Tensor, axes) -> Tensor:
    inv = np.argsort(axes)
    return _node(np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inv),))


def getitem(x: Tensor, key) -> Tensor:
    """Basic (slice/int) indexing."""
    shape = x.shape
    dtype = x.data.dtype

    def bw(g):
        full = np.zeros(shape, dtype=dtype)
        full[key] = g
        return (full,)

    return _node(x.data[key], (x,), bw)


def concat(xs: Sequence[Tensor], axis: int = -1) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    axis = axis % xs[0].ndim
    sizes = [x.shape[axis] for x in xs]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, splits, axis=axis))

    return _node(np.concatenate([x.data for x in xs], axis=axis), xs, bw)


def take(x: Tensor, index: np.ndarray) -> Tensor:
    """Gather rows along axis 0 (embedding lookup); repeated rows accumulate."""
    index = np.asarray(index, dtype=np.int64)
    if index.size and (index.min() < 0 or index.max() >= x.shape[0]):
        raise IndexError(f"take: index out of range for {x.shape[0]} rows")
    shape = x.shape
    dtype = x.data.dtype

    def bw(g):
        full = np.zeros(shape, dtype=dtype)
        np.add.at(full, index.reshape(-1), g.reshape(-1, *shape[1:]))
        return (full,)

    return _node(x.data[index], (x,), bw)


# ---------------------------------------------------------------- reductions


def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    shape = x.shape

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _node(np.asarray(x.data.sum(axis=axis, keepdims=keepdims)), (x,), bw)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = x.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    if n == 0:
        raise ValueError("mean over an empty axis")
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / float(n))


def mean_over_rows(x: Tensor) -> Tensor:
    """Average over the first axis: (n, d) -> (d,)."""
    if x.ndim < 1 or x.shape[0] == 0:
        raise ValueError(f"mean_over_rows: empty leading axis in shape {x.shape}")
    return mean(x, axis=0)


def reduce(kind: str, x: Tensor) -> Tensor:
    if kind == "mean_over_rows":
        return mean_over_rows(x)
    if kind == "sum":
        return sum(x)
    raise ValueError(f"unknown reduction {kind!r}")


# ---------------------------------------------------------------- normalisation


def masked_softmax(logits: Tensor, mask) -> Tensor:
    """Softmax over the last axis with an additive mask (0 or NEG_INF).

    Blocked positions are set to exactly zero after normalisation and get
    zero gradient.
    """
    mask = mask.data if isinstance(mask, Tensor) else np.asarray(mask)
    blocked = mask <= NEG_INF / 2
    if np.any(np.all(blocked, axis=-1)):
        raise ValueError("masked_softmax: a row has no attendable entry")
    z = logits.data + mask
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    e = np.where(blocked, 0.0, e).astype(logits.data.dtype)
    y = e / e.sum(axis=-1, keepdims=True)

    def bw(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return _node(y, (logits,), bw)


def softmax(logits: Tensor) -> Tensor:
    return masked_softmax(logits, np.zeros(logits.shape[-1], dtype=logits.data.dtype))


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    xc = xd - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    y = xhat * gamma.data + beta.data
    d = xd.shape[-1]

    def bw(g):
        gx = gg = gb = None
        if gamma.requires_grad:
            gg = (g * xhat).reshape(-1, d).sum(axis=0)
        if beta.requires_grad:
            gb = g.reshape(-1, d).sum(axis=0)
        if x.requires_grad:
            gh = g * gamma.data
            gx = inv * (gh - gh.mean(axis=-1, keepdims=True) - xhat * (gh * xhat).mean(axis=-1, keepdims=True))
        return gx, gg, gb

    return _node(y, (x, gamma, beta), bw)


# ---------------------------------------------------------------- losses


def log_softmax(logits: Tensor, mask=None) -> Tensor:
    z = logits.data
    if mask is not None:
        z = z + mask
    z = z - z.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    y = z - lse
    p = np.exp(y)

    def bw(g):
        return (g - p * g.sum(axis=-1, keepdims=True),)

    return _node(y, (logits,), bw)


def cross_entropy(logits: Tensor, target, mask=None, reduction: str = "mean", weight=None) -> Tensor:
    """Cross-entropy from raw logits (..., K) and integer classes (...).

    ``mask`` is an optional additive mask over classes (padded candidates);
    ``weight`` optionally scales each row's term and overrides ``reduction``.
    """
    target = np.asarray(target, dtype=np.int64)
    k = logits.shape[-1]
    if target.shape != logits.shape[:-1]:
        raise ValueError(f"cross_entropy: target shape {target.shape} vs logits {logits.shape}")
    if target.size and (target.min() < 0 or target.max() >= k):
        raise ValueError(f"cross_entropy: class index out of range [0, {k})")
    z = logits.data if mask is None else logits.data + mask
    z = z - z.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    logp = z - lse
    picked = np.take_along_axis(logp, target[..., None], axis=-1)[..., 0]
    if weight is not None:
        scale = np.asarray(weight, dtype=logp.dtype)
        if scale.shape != target.shape:
            raise ValueError(f"cross_entropy: weight shape {scale.shape} vs target {target.shape}")
        value = -(picked * scale).sum()
        scale = scale[..., None]
    else:
        scale = 1.0 / max(target.size, 1) if reduction == "mean" else 1.0
        value = -picked.sum() * scale

    def bw(g):
        p = np.exp(logp)
        onehot = np.zeros_like(p)
        np.put_along_axis(onehot, target[..., None], 1.0, axis=-1)
        return ((p - onehot) * (g * scale),)

    return _node(np.asarray(value, dtype=logits.data.dtype), (logits,), bw)


def binary_cross_entropy(prob: Tensor, target, reduction: str = "mean") -> Tensor:
    """BCE on probabilities; inputs are clamped to [BCE_EPS, 1 - BCE_EPS]."""
    target = np.asarray(target, dtype=prob.data.dtype)
    p = prob.data
    clipped = (p < BCE_EPS) | (p > 1 - BCE_EPS)
    if np.any(clipped):
        logger.debug("binary_cross_entropy: clamped %d probabilities", int(clipped.sum()))
    pc = np.clip(p, BCE_EPS, 1 - BCE_EPS)
    terms = -(target * np.log(pc) + (1 - target) * np.log(1 - pc))
    n = max(terms.size, 1)
    scale = 1.0 / n if reduction == "mean" else 1.0

    def bw(g):
        d = (pc - target) / (pc * (1 - pc))
        d = np.where(clipped, 0.0, d)
        return (d * (g * scale),)

    return _node(np.asarray(terms.sum() * scale, dtype=p.dtype), (prob,), bw)


def losses(kind: str, prediction: Tensor, target, **kw) -> Tensor:
    if kind == "cross_entropy":
        return cross_entropy(prediction, target, **kw)
    if kind == "binary_cross_entropy":
        return binary_cross_entropy(prediction, target, **kw)
    raise ValueError(f"unknown loss {kind!r}")
