"""Central finite-difference gradient checks (run under float64 precision)."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import autograd as ag
from .autograd import Tensor

STEP = 1e-3
OP_TOL = 1e-4
END_TO_END_TOL = 1e-3


def rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Norm-wise relative error, guarded for near-zero gradients."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    scale = max(np.linalg.norm(a), np.linalg.norm(n), 1e-8)
    return float(np.linalg.norm(a - n) / scale)


def numeric_grad(f: Callable[[], Tensor], x: Tensor, step: float = STEP, index=None) -> np.ndarray:
    """d f / d x by central differences, over all entries or the listed flat ``index``."""
    flat = x.data.reshape(-1)
    idx = range(flat.size) if index is None else index
    out = np.zeros(len(idx))
    for k, i in enumerate(idx):
        old = flat[i]
        flat[i] = old + step
        up = float(f().data)
        flat[i] = old - step
        down = float(f().data)
        flat[i] = old
        out[k] = (up - down) / (2 * step)
    return out


def analytic_grads(f: Callable[[], Tensor], inputs: Sequence[Tensor]) -> list[np.ndarray]:
    ag.zero_grad(inputs)
    ag.backward(f())
    return [x.grad.copy() for x in inputs]


def check(f: Callable[[], Tensor], inputs: Sequence[Tensor], step: float = STEP) -> float:
    """Worst relative error over ``inputs``; ``f`` must return a scalar tensor."""
    worst = 0.0
    for x, g in zip(inputs, analytic_grads(f, inputs)):
        worst = max(worst, rel_error(g.ravel(), numeric_grad(f, x, step)))
    return worst


def check_sampled(f: Callable[[], Tensor], params: dict[str, Tensor], n: int, rng: np.random.Generator,
                  step: float = STEP) -> tuple[float, list]:
    """Compare on ``n`` randomly chosen scalar parameters; returns (error, samples)."""
    names = sorted(params)
    grads = dict(zip(names, analytic_grads(f, [params[k] for k in names])))
    picks = []
    for _ in range(n):
        name = names[int(rng.integers(len(names)))]
        picks.append((name, int(rng.integers(params[name].size))))
    ana = np.array([grads[k].reshape(-1)[i] for k, i in picks])
    num = np.array([numeric_grad(f, params[k], step, [i])[0] for k, i in picks])
    return rel_error(ana, num), list(zip(picks, ana, num))
