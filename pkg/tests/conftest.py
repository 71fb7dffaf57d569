import os
from pathlib import Path

import numpy as np
import pytest

import deepgcn.autodiff as ad
from deepgcn.autodiff import Tape, TensorNode
from deepgcn.data import DatasetBundle, Split
from deepgcn.graph import load_graph, renormalized_operator
from deepgcn.models import ModelConfig, ModelKind, init_params, model_forward


def dense_renormalized(g) -> np.ndarray:
    """Independent dense oracle: D~^(-1/2) (A + I) D~^(-1/2)."""
    a = g.adjacency_dense() + np.eye(g.num_nodes)
    d_inv_sqrt = 1.0 / np.sqrt(a.sum(axis=1))
    return d_inv_sqrt[:, None] * a * d_inv_sqrt[None, :]


def two_cluster_bundle(nodes_per_cluster: int = 5, seed: int = 3,
                       num_features: int = 8,
                       overlap_splits: bool = False) -> DatasetBundle:
    """Tiny two-community dataset: dense within clusters, one bridge edge.

    Features are noisy one-hot-ish indicators of the community, so any of the
    models can separate the classes. With overlap_splits the single split uses
    every node for train, val, and test (in-memory sanity checks only; the
    on-disk format requires disjoint splits).
    """
    n = 2 * nodes_per_cluster
    edges = []
    for base in (0, nodes_per_cluster):
        for i in range(nodes_per_cluster):
            for j in range(i + 1, nodes_per_cluster):
                edges.append((base + i, base + j))
    edges.append((0, nodes_per_cluster))
    labels = np.array([0] * nodes_per_cluster + [1] * nodes_per_cluster, dtype=np.int64)
    rng = np.random.default_rng(seed)
    features = 0.05 * rng.random((n, num_features))
    features[:nodes_per_cluster, 0] += 1.0
    features[nodes_per_cluster:, 1] += 1.0
    norm = features / features.sum(axis=1, keepdims=True)
    idx = np.arange(n)
    if overlap_splits:
        split = Split(train=idx, val=idx, test=idx)
    else:
        cluster = np.arange(nodes_per_cluster)
        train = np.concatenate([cluster[:-2], nodes_per_cluster + cluster[:-2]])
        val = np.array([nodes_per_cluster - 2, 2 * nodes_per_cluster - 2])
        test = np.array([nodes_per_cluster - 1, 2 * nodes_per_cluster - 1])
        split = Split(train=train, val=val, test=test)
    return DatasetBundle("two-cluster", load_graph(edges, n), norm, labels, 2, [split])


@pytest.fixture
def toy_bundle() -> DatasetBundle:
    return two_cluster_bundle()


def gcnii_gradient_max_rel_error(seed: int = 0) -> float:
    """Analytic vs central-finite-difference gradients on a 2-layer toy model.

    Covers every differentiable op in one pass: dropout-free forward through
    projection, two mixing layers, classifier, log-softmax, and the masked
    loss. The seed keeps every preactivation clear of the ReLU kinks relative
    to the 1e-5 step.
    """
    rng = np.random.default_rng(seed)
    g = load_graph([(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 3)], 6)
    prop = renormalized_operator(g)
    config = ModelConfig(model_kind=ModelKind.GCNII, num_layers=2, hidden_dim=4,
                         alpha=0.1, lam=0.5, dropout=0.0)
    features = rng.random((6, 4)) + 0.1
    labels = rng.integers(0, 3, size=6)
    mask = np.arange(6)
    params = init_params(config, 4, 3, rng)

    tape = Tape()
    logp = model_forward(config, params, prop, tape.tensor(features), training=True)
    tape.backward(ad.nll_loss(logp, labels, mask))

    def loss_value() -> float:
        out = model_forward(config, params, prop, TensorNode(features), training=False)
        return ad.nll_loss(out, labels, mask).item()

    step = 1e-5
    worst = 0.0
    for param, _ in params.all_params():
        arr = param.values
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + step
            up = loss_value()
            arr[idx] = orig - step
            down = loss_value()
            arr[idx] = orig
            numeric = (up - down) / (2 * step)
            analytic = param.grad[idx]
            denom = max(abs(numeric), abs(analytic), 1e-6)
            worst = max(worst, abs(numeric - analytic) / denom)
    return worst


def dataset_root() -> Path:
    return Path(os.environ.get("DEEPGCN_DATA", Path(__file__).resolve().parent.parent / "data"))


def require_dataset(name: str) -> Path:
    path = dataset_root() / name
    if not (path / "meta.json").is_file():
        pytest.skip(
            f"converted dataset {name!r} not present under {dataset_root()} "
            f"(raw upstream files cannot be downloaded in this environment; "
            f"run the converter and place its output there to enable this test)")
    return path
