"""Dense reverse-mode automatic differentiation on a flat tape.

Everything is a 2-D float64 matrix. Ops compute eagerly with numpy, append
an operation record to the active tape, and `Tape.backward` replays the
records in exact reverse order, accumulating gradients additively. Passing
`tape=None` runs ops in inference mode (no records, no gradients).

The operator set is intentionally small: exactly what graph-convolutional
models with an input projection, propagation layers, and a classifier head
need. Elementwise work in the hot path goes through the fused kernels in
`_kernels`, which are sequential and bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import _kernels as kernels
from .graph import PropMatrix


class NumericError(ArithmeticError):
    """A non-finite value (NaN/Inf) appeared at an op boundary."""


class ShapeError(ValueError):
    """Operand shapes are incompatible with the op."""


class TensorNode:
    """A 2-D float64 matrix participating in the autodiff graph."""

    __slots__ = ("values", "grad", "requires_grad", "needs_grad", "tape", "tape_id")

    def __init__(self, values: np.ndarray, requires_grad: bool = False,
                 tape: "Tape | None" = None):
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.ndim != 2:
            raise ShapeError(f"tensors are 2-D, got shape {values.shape}")
        _check_finite(values)
        self.values = values
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        # needs_grad marks nodes on some path from a parameter to the loss;
        # gradients are only materialized for those.
        self.needs_grad = requires_grad
        self.tape = tape
        self.tape_id = tape.register(self) if tape is not None else -1

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]

    def item(self) -> float:
        if self.values.size != 1:
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.values[0, 0])


@dataclass
class OpRecord:
    kind: str
    inputs: tuple[TensorNode, ...]
    output: TensorNode
    ctx: tuple = ()


class Tape:
    """Ordered op records plus the RNG used by stochastic ops (dropout)."""

    def __init__(self, rng: np.random.Generator | None = None):
        self.records: list[OpRecord] = []
        self.rng = rng
        self._next_id = 0

    def register(self, node: TensorNode) -> int:
        tid = self._next_id
        self._next_id += 1
        return tid

    def tensor(self, values: np.ndarray, requires_grad: bool = False) -> TensorNode:
        return TensorNode(values, requires_grad=requires_grad, tape=self)

    def record(self, kind: str, inputs: tuple[TensorNode, ...], output: TensorNode,
               ctx: tuple = ()) -> None:
        self.records.append(OpRecord(kind, inputs, output, ctx))

    def backward(self, root: TensorNode) -> None:
        """Accumulate d(root)/d(node) into .grad for every needs_grad node.

        The records (and the activations they hold) are released afterwards:
        a tape drives exactly one reverse sweep.
        """
        if root.values.size != 1:
            raise ShapeError("backward root must be a scalar (1x1) tensor")
        root.grad = np.ones_like(root.values)
        for rec in reversed(self.records):
            g = rec.output.grad
            if g is None:
                continue
            _BACKWARD[rec.kind](rec, g)
            if not rec.output.requires_grad:
                # Each node is produced by exactly one record, so its gradient
                # is fully consumed here; free it to cap peak memory.
                rec.output.grad = None
        # Break the node <-> record reference cycles so activations free by
        # refcount instead of waiting for a full gc pass.
        self.records.clear()


def _check_finite(values: np.ndarray) -> None:
    # A pairwise sum is non-finite iff some entry is (overflow of genuinely
    # finite ~1e308-scale sums also trips this, which is equally fatal).
    if not np.isfinite(values.sum()):
        raise NumericError("non-finite value at op boundary")


def _result(values: np.ndarray, kind: str, inputs: tuple[TensorNode, ...],
            ctx: tuple = (), check: bool = True,
            tape: "Tape | None" = None, total: float | None = None) -> TensorNode:
    # Ops that cannot create a non-finite value from finite inputs (relu,
    # log-softmax) skip the boundary check; kernel-backed ops pass the output
    # total they already accumulated instead of paying another pass.
    if check:
        if total is not None:
            if not np.isfinite(total):
                raise NumericError("non-finite value at op boundary")
        else:
            _check_finite(values)
    if tape is None:
        tape = next((t.tape for t in inputs if t.tape is not None), None)
    out = TensorNode.__new__(TensorNode)
    out.values = values
    out.grad = None
    out.requires_grad = False
    out.needs_grad = any(t.needs_grad for t in inputs)
    out.tape = tape
    out.tape_id = tape.register(out) if tape is not None else -1
    if tape is not None and out.needs_grad:
        tape.record(kind, inputs, out, ctx)
    return out


def _accumulate(node: TensorNode, delta: np.ndarray) -> None:
    """Adopt or add a freshly allocated gradient contribution."""
    if not node.needs_grad:
        return
    if node.grad is None:
        node.grad = delta
    else:
        np.add(node.grad, delta, out=node.grad)


# ---------------------------------------------------------------------------
# Operator set

def spmm(p: PropMatrix, h: TensorNode) -> TensorNode:
    """Sparse-by-dense product p @ h; p is symmetric, which the gradient rule uses."""
    if p.num_nodes != h.shape[0]:
        raise ShapeError(f"operator has {p.num_nodes} columns, tensor has {h.shape[0]} rows")
    values, total = p.matmul_with_total(h.values)
    return _result(values, "spmm", (h,), ctx=(p,), total=total)


def _spmm_backward(rec: OpRecord, g: np.ndarray) -> None:
    (h,) = rec.inputs
    (p,) = rec.ctx
    _accumulate(h, p.matmul(g))  # p is symmetric, so p^T g == p g


def matmul(a: TensorNode, b: TensorNode) -> TensorNode:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dims differ: {a.shape} x {b.shape}")
    return _result(a.values @ b.values, "matmul", (a, b))


def _matmul_backward(rec: OpRecord, g: np.ndarray) -> None:
    a, b = rec.inputs
    if a.needs_grad:
        _accumulate(a, g @ b.values.T)
    if b.needs_grad:
        _accumulate(b, a.values.T @ g)


def sparse_project(x: sp.csr_matrix, w: TensorNode, rate: float, training: bool,
                   rng: np.random.Generator | None = None,
                   tape: Tape | None = None) -> TensorNode:
    """Inverted dropout on a constant sparse input fused with its projection.

    Masking only the stored nonzeros is exact: dropping a zero entry is a
    no-op. The input is constant (never differentiated), so only the weight
    gets a gradient rule.
    """
    if x.shape[1] != w.shape[0]:
        raise ShapeError(f"projection dims differ: {x.shape} x {w.shape}")
    if training and rate > 0.0:
        if rng is None:
            raise ValueError("training-mode dropout needs an RNG")
        keep = rng.random(x.data.shape, dtype=np.float32) >= rate
        data = x.data * (keep / (1.0 - rate))
        x = sp.csr_matrix((data, x.indices, x.indptr), shape=x.shape)
    res = kernels.csr_matmul(x.indptr, x.indices, x.data, w.values)
    if res is None:
        out = x @ w.values
        return _result(out, "sparse_project", (w,), ctx=(x,), tape=tape)
    return _result(res[0], "sparse_project", (w,), ctx=(x,), tape=tape, total=res[1])


def _sparse_project_backward(rec: OpRecord, g: np.ndarray) -> None:
    (w,) = rec.inputs
    (x,) = rec.ctx
    _accumulate(w, np.ascontiguousarray(x.T @ g))


def add_bias(h: TensorNode, b: TensorNode) -> TensorNode:
    """Row-broadcast bias add; b has shape (1, cols)."""
    if b.shape != (1, h.shape[1]):
        raise ShapeError(f"bias shape {b.shape} does not broadcast over {h.shape}")
    return _result(h.values + b.values, "add_bias", (h, b))


def _add_bias_backward(rec: OpRecord, g: np.ndarray) -> None:
    h, b = rec.inputs
    _accumulate(h, g)
    if b.needs_grad:
        _accumulate(b, g.sum(axis=0, keepdims=True))


def relu(h: TensorNode) -> TensorNode:
    return _result(np.maximum(h.values, 0.0), "relu", (h,), check=False)


def _relu_backward(rec: OpRecord, g: np.ndarray) -> None:
    (h,) = rec.inputs
    if not h.needs_grad:
        return
    # Subgradient at exactly 0 is defined as 0.
    if h.grad is None:
        h.grad = kernels.masked_copy(g, rec.output.values)
    else:
        kernels.masked_accum(h.grad, g, rec.output.values)


def add_scaled(a: TensorNode, b: TensorNode, ca: float, cb: float) -> TensorNode:
    """ca * a + cb * b with equal shapes."""
    if a.shape != b.shape:
        raise ShapeError(f"add_scaled shapes differ: {a.shape} vs {b.shape}")
    values, total = kernels.combine(a.values, ca, b.values, cb)
    return _result(values, "add_scaled", (a, b), ctx=(ca, cb), total=total)


def _add_scaled_backward(rec: OpRecord, g: np.ndarray) -> None:
    for node, c in zip(rec.inputs, rec.ctx):
        if not node.needs_grad:
            continue
        if node.grad is None:
            node.grad = kernels.scale_copy(g, c)
        else:
            kernels.accum_scaled(node.grad, g, c)


def identity_mix(h: TensorNode, w: TensorNode, beta: float) -> TensorNode:
    """(1 - beta) * h + beta * (h @ w); w square, acting on h's columns."""
    if w.shape[0] != w.shape[1]:
        raise ShapeError(f"mix weight must be square, got {w.shape}")
    if h.shape[1] != w.shape[0]:
        raise ShapeError(f"identity_mix dims differ: {h.shape} x {w.shape}")
    values, total = kernels.combine(h.values, 1.0 - beta, h.values @ w.values, beta)
    return _result(values, "identity_mix", (h, w), ctx=(beta,), total=total)


def _identity_mix_backward(rec: OpRecord, g: np.ndarray) -> None:
    h, w = rec.inputs
    (beta,) = rec.ctx
    if h.needs_grad:
        gw = g @ w.values.T
        if h.grad is None:
            h.grad = kernels.combine(g, 1.0 - beta, gw, beta)[0]
        else:
            kernels.accum_combined(h.grad, g, 1.0 - beta, gw, beta)
    if w.needs_grad:
        delta = h.values.T @ g
        delta *= beta
        _accumulate(w, delta)


def dropout(h: TensorNode, rate: float, training: bool,
            rng: np.random.Generator | None = None) -> TensorNode:
    """Inverted dropout: zero entries with probability `rate`, scale survivors.

    Identity in eval mode and at rate 0 (returns the input node unchanged).
    """
    if not 0.0 <= rate < 1.0:
        raise ShapeError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return h
    if rng is None:
        if h.tape is None or h.tape.rng is None:
            raise ValueError("training-mode dropout needs an RNG")
        rng = h.tape.rng
    mask = rng.random(h.shape, dtype=np.float32) >= rate
    scale = 1.0 / (1.0 - rate)
    values, total = kernels.apply_mask(h.values, mask, scale)
    return _result(values, "dropout", (h,), ctx=(mask, scale), total=total)


def _dropout_backward(rec: OpRecord, g: np.ndarray) -> None:
    (h,) = rec.inputs
    mask, scale = rec.ctx
    if not h.needs_grad:
        return
    if h.grad is None:
        h.grad = kernels.apply_mask_grad(g, mask, scale)
    else:
        kernels.apply_mask_accum(h.grad, g, mask, scale)


def log_softmax_rows(h: TensorNode) -> TensorNode:
    """Numerically stable per-row log-softmax (max subtraction)."""
    shifted = h.values - h.values.max(axis=1, keepdims=True)
    values = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return _result(values, "log_softmax", (h,), check=False)


def _log_softmax_backward(rec: OpRecord, g: np.ndarray) -> None:
    (h,) = rec.inputs
    soft = np.exp(rec.output.values)
    soft *= g.sum(axis=1, keepdims=True)
    _accumulate(h, np.subtract(g, soft, out=soft))


def nll_loss(logp: TensorNode, labels: np.ndarray, mask: np.ndarray) -> TensorNode:
    """Mean negative log-likelihood of `labels` over the rows in `mask`."""
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        raise ShapeError("nll_loss mask is empty")
    labels = np.asarray(labels, dtype=np.int64)
    picked = labels[mask]
    if picked.min() < 0 or picked.max() >= logp.shape[1]:
        raise ShapeError("labels outside [0, num_classes) on the mask")
    value = -logp.values[mask, picked].mean()
    return _result(np.array([[value]]), "nll_loss", (logp,), ctx=(mask, picked))


def _nll_loss_backward(rec: OpRecord, g: np.ndarray) -> None:
    (logp,) = rec.inputs
    mask, picked = rec.ctx
    delta = np.zeros_like(logp.values)
    delta[mask, picked] = -g[0, 0] / mask.size
    _accumulate(logp, delta)


_BACKWARD: dict[str, Callable[[OpRecord, np.ndarray], None]] = {
    "spmm": _spmm_backward,
    "matmul": _matmul_backward,
    "sparse_project": _sparse_project_backward,
    "add_bias": _add_bias_backward,
    "relu": _relu_backward,
    "add_scaled": _add_scaled_backward,
    "identity_mix": _identity_mix_backward,
    "dropout": _dropout_backward,
    "log_softmax": _log_softmax_backward,
    "nll_loss": _nll_loss_backward,
}
