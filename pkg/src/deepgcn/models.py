"""Model definitions: vanilla GCN, residual/DropEdge variants, APPNP, GCNII.

All models share the same skeleton: project the (dropped-out) features to
the hidden width, run K graph layers, classify, log-softmax. The layer body
is what distinguishes them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .autodiff import Tape, TensorNode
from .graph import PropMatrix


class ModelKind(str, Enum):
    GCN = "gcn"
    GCN_RES = "gcn-res"
    GCN_DROPEDGE = "gcn-dropedge"
    APPNP = "appnp"
    GCNII = "gcnii"
    GCNII_STAR = "gcnii-star"


@dataclass
class ModelConfig:
    model_kind: ModelKind = ModelKind.GCNII
    num_layers: int = 2
    hidden_dim: int = 64
    alpha: float = 0.1
    lam: float = 0.5
    dropout: float = 0.5
    drop_edge: float = 0.0
    lr: float = 0.01
    wd_conv: float = 0.01
    wd_dense: float = 5e-4
    patience: int = 100
    max_epochs: int = 1500
    seed: int = 0
    use_initial_residual: bool = True
    use_identity_map: bool = True

    def __post_init__(self):
        self.model_kind = ModelKind(self.model_kind)
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        for name in ("dropout", "drop_edge"):
            rate = getattr(self, name)
            if not 0.0 <= rate < 1.0:
                raise ValueError(f"{name} must be in [0, 1)")
        if self.lam < 0.0:
            raise ValueError("lam must be nonnegative")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")


def beta_schedule(layer_index: int, lam: float) -> float:
    """Per-layer identity-mix strength log(lam / layer + 1); layers are 1-indexed."""
    if layer_index < 1:
        raise ValueError("layer_index is 1-based")
    return math.log(lam / layer_index + 1.0)


@dataclass
class ModelParams:
    """All trainable tensors, tagged by weight-decay group via all_params()."""

    proj_w: TensorNode
    proj_b: TensorNode
    conv_weights: list[TensorNode]
    conv_weights2: list[TensorNode]  # second per-layer set, GCNII* only
    out_w: TensorNode
    out_b: TensorNode

    def all_params(self) -> list[tuple[TensorNode, str]]:
        tagged = [(self.proj_w, "dense"), (self.proj_b, "dense")]
        tagged += [(w, "conv") for w in self.conv_weights]
        tagged += [(w, "conv") for w in self.conv_weights2]
        tagged += [(self.out_w, "dense"), (self.out_b, "dense")]
        return tagged

    def num_values(self) -> int:
        return sum(p.values.size for p, _ in self.all_params())

    def snapshot(self) -> list[np.ndarray]:
        return [p.values.copy() for p, _ in self.all_params()]

    def restore(self, snap: list[np.ndarray]) -> None:
        for (p, _), vals in zip(self.all_params(), snap):
            p.values[...] = vals


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_params(config: ModelConfig, num_features: int, num_classes: int,
                rng: np.random.Generator) -> ModelParams:
    """Glorot-uniform weights, zero biases. APPNP has no per-layer weights."""
    h = config.hidden_dim

    def weight(fi, fo):
        return TensorNode(_glorot(rng, fi, fo), requires_grad=True)

    per_layer = 0 if config.model_kind is ModelKind.APPNP else config.num_layers
    conv = [weight(h, h) for _ in range(per_layer)]
    conv2 = ([weight(h, h) for _ in range(per_layer)]
             if config.model_kind is ModelKind.GCNII_STAR else [])
    return ModelParams(
        proj_w=weight(num_features, h),
        proj_b=TensorNode(np.zeros((1, h)), requires_grad=True),
        conv_weights=conv,
        conv_weights2=conv2,
        out_w=weight(h, num_classes),
        out_b=TensorNode(np.zeros((1, num_classes)), requires_grad=True),
    )


def param_count(config: ModelConfig, num_features: int, num_classes: int) -> int:
    h, k = config.hidden_dim, config.num_layers
    per_layer = {ModelKind.APPNP: 0, ModelKind.GCNII_STAR: 2}.get(config.model_kind, 1)
    return num_features * h + per_layer * h * h * k + h * num_classes + h + num_classes


def gcn_layer(h: TensorNode, p: PropMatrix, w: TensorNode) -> TensorNode:
    return ad.relu(ad.matmul(ad.spmm(p, h), w))


def gcn_res_layer(h: TensorNode, p: PropMatrix, w: TensorNode) -> TensorNode:
    """Propagation plus a same-layer residual before the weight."""
    return ad.relu(ad.matmul(ad.add_scaled(ad.spmm(p, h), h, 1.0, 1.0), w))


def gcnii_layer(h: TensorNode, h0: TensorNode, p: PropMatrix, w: TensorNode,
                alpha: float, beta: float) -> TensorNode:
    support = ad.add_scaled(ad.spmm(p, h), h0, 1.0 - alpha, alpha)
    return ad.relu(ad.identity_mix(support, w, beta))


def gcnii_star_layer(h: TensorNode, h0: TensorNode, p: PropMatrix,
                     w1: TensorNode, w2: TensorNode,
                     alpha: float, beta: float) -> TensorNode:
    mixed = ad.identity_mix(ad.spmm(p, h), w1, beta)
    mixed0 = ad.identity_mix(h0, w2, beta)
    return ad.relu(ad.add_scaled(mixed, mixed0, 1.0 - alpha, alpha))


def _project_input(x, params: ModelParams, drop: float, training: bool,
                   rng, tape) -> TensorNode:
    """Dropout on the raw input, then the dense projection, bias, and relu.

    Sparse inputs take the fused dropout-projection path; masking only stored
    nonzeros is exact since dropping zeros is a no-op.
    """
    if isinstance(x, sp.csr_matrix):
        h = ad.sparse_project(x, params.proj_w, drop, training, rng, tape)
    else:
        h = ad.matmul(ad.dropout(x, drop, training, rng), params.proj_w)
    return ad.relu(ad.add_bias(h, params.proj_b))


def appnp_forward(x, p: PropMatrix, params: ModelParams,
                  alpha: float, num_steps: int, dropout: float = 0.0,
                  training: bool = False,
                  rng: np.random.Generator | None = None,
                  tape: Tape | None = None) -> TensorNode:
    """Feature MLP followed by weight-free propagation steps, then log-softmax."""
    h = _project_input(x, params, dropout, training, rng, tape)
    h = ad.dropout(h, dropout, training, rng)
    h = ad.add_bias(ad.matmul(h, params.out_w), params.out_b)
    h0 = h
    for _ in range(num_steps):
        h = ad.add_scaled(ad.spmm(p, h), h0, 1.0 - alpha, alpha)
    return ad.log_softmax_rows(h)


def model_forward(config: ModelConfig, params: ModelParams, p: PropMatrix,
                  x, training: bool,
                  rng: np.random.Generator | None = None,
                  tape: Tape | None = None) -> TensorNode:
    """Full forward pass to log-probabilities; x is a TensorNode or a CSR matrix.

    Dropout sits on the raw input, on each graph layer's input, and on the
    classifier's input; recorded as such in run metadata.
    """
    kind = config.model_kind
    if kind is ModelKind.APPNP:
        return appnp_forward(x, p, params, config.alpha, config.num_layers,
                             config.dropout, training, rng, tape)

    drop = config.dropout
    h = _project_input(x, params, drop, training, rng, tape)
    h0 = h
    for layer in range(1, config.num_layers + 1):
        h = ad.dropout(h, drop, training, rng)
        w = params.conv_weights[layer - 1]
        if kind in (ModelKind.GCN, ModelKind.GCN_DROPEDGE):
            h = gcn_layer(h, p, w)
        elif kind is ModelKind.GCN_RES:
            h = gcn_res_layer(h, p, w)
        else:
            beta = beta_schedule(layer, config.lam) if config.use_identity_map else 1.0
            residual = h0 if config.use_initial_residual else h
            if kind is ModelKind.GCNII:
                h = gcnii_layer(h, residual, p, w, config.alpha, beta)
            else:
                h = gcnii_star_layer(h, residual, p, w, params.conv_weights2[layer - 1],
                                     config.alpha, beta)
    h = ad.dropout(h, drop, training, rng)
    h = ad.add_bias(ad.matmul(h, params.out_w), params.out_b)
    return ad.log_softmax_rows(h)
