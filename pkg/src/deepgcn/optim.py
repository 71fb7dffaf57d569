"""Adam with per-group coupled L2 decay, plus weight-spectrum diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as kernels
from .autodiff import TensorNode


class MissingGradientError(RuntimeError):
    """adam_step was called on a parameter whose gradient is unset."""


@dataclass
class _ParamSlot:
    param: TensorNode
    group: str
    m: np.ndarray
    v: np.ndarray


@dataclass
class AdamState:
    """Optimizer state: moment arrays per parameter, one decay rate per group.

    Decay is coupled L2: lambda_group * theta is added to the gradient before
    the moment updates.
    """

    learning_rate: float
    weight_decay: dict[str, float]
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    slots: list[_ParamSlot] = field(default_factory=list)

    def register(self, param: TensorNode, group: str) -> None:
        if group not in self.weight_decay:
            raise KeyError(f"unknown weight-decay group {group!r}")
        self.slots.append(_ParamSlot(param, group,
                                     np.zeros_like(param.values),
                                     np.zeros_like(param.values)))


def adam_step(state: AdamState) -> None:
    """One bias-corrected Adam update over every registered parameter."""
    for slot in state.slots:
        if slot.param.grad is None:
            raise MissingGradientError(f"parameter in group {slot.group!r} has no gradient")
    state.step_count += 1
    t = state.step_count
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for slot in state.slots:
        kernels.adam_update(slot.param.values, slot.param.grad, slot.m, slot.v,
                            state.weight_decay[slot.group], state.beta1,
                            state.beta2, state.learning_rate, c1, c2, state.eps)


def max_singular_value(w: TensorNode | np.ndarray, tol: float = 1e-10,
                       max_iters: int = 10_000) -> float:
    """Largest singular value via power iteration on the Gram matrix."""
    a = w.values if isinstance(w, TensorNode) else np.asarray(w, dtype=np.float64)
    if a.size == 0 or not np.any(a):
        raise ValueError("max_singular_value needs a nonzero matrix")
    gram = a.T @ a if a.shape[1] <= a.shape[0] else a @ a.T
    n = gram.shape[0]
    # Deterministic start with a mild tilt so it is not orthogonal to the
    # leading eigenvector for e.g. diagonal matrices.
    z = 1.0 + 1e-3 * np.arange(n)
    z /= np.linalg.norm(z)
    prev = 0.0
    for _ in range(max_iters):
        gz = gram @ z
        est = float(z @ gz)
        nrm = np.linalg.norm(gz)
        if nrm == 0.0:
            return 0.0
        z = gz / nrm
        if abs(est - prev) <= tol * max(abs(est), 1.0):
            return float(np.sqrt(est))
        prev = est
    raise RuntimeError(f"power iteration did not converge in {max_iters} iterations")
