"""AdamW with decoupled weight decay, plus global-norm clipping."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .autograd import Tensor

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    step: int = 0
    skipped: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adamw_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
    weight_decay: float = 0.0,
) -> bool:
    """Update ``params`` in place. Returns False (and counts a skip) on non-finite grads."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            state.skipped += 1
            logger.warning("adamw_step: non-finite gradient in %s, step skipped", name)
            return False
    b1, b2 = betas
    state.step += 1
    c1 = 1 - b1**state.step
    c2 = 1 - b2**state.step
    for name, w in params.items():
        g = grads[name]
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(w)
            state.v[name] = np.zeros_like(w)
        v = state.v[name]
        if m.shape != w.shape:
            raise ValueError(f"adamw_step: moment shape {m.shape} != param shape {w.shape} for {name}")
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        if weight_decay:
            w -= (lr * weight_decay) * w
        w -= (lr * (m / c1) / (np.sqrt(v / c2) + eps)).astype(w.dtype)
    return True


def clip_grad_norm(params: dict[str, Tensor], max_norm: float) -> float:
    total = float(np.sqrt(np.sum([np.sum(p.grad.astype(np.float64) ** 2) for p in params.values()])))
    if max_norm > 0 and total > max_norm and np.isfinite(total):
        scale = max_norm / (total + 1e-6)
        for p in params.values():
            p.grad *= scale
        logger.debug("clipped gradient norm %.3f -> %.1f", total, max_norm)
    return total


class AdamW:
    def __init__(self, params: dict[str, Tensor], lr=1e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.01):
        self.params = params
        self.lr = lr
        self.betas = tuple(betas)
        self.eps = eps
        self.weight_decay = weight_decay
        self.state = AdamState()

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def step(self) -> bool:
        return adamw_step(
            {k: p.data for k, p in self.params.items()},
            {k: p.grad for k, p in self.params.items()},
            self.state,
            self.lr,
            self.betas,
            self.eps,
            self.weight_decay,
        )
