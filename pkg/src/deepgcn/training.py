"""Training loop with early stopping, evaluation helpers, and sweep drivers."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .autodiff import Tape, TensorNode
from .data import DatasetBundle, DatasetSplitError, Split
from .graph import PropMatrix, dropedge_sample, renormalized_operator
from .models import ModelConfig, ModelKind, ModelParams, init_params, model_forward
from .optim import AdamState, adam_step, max_singular_value

RNG_FAMILY = "pcg64"
DROPOUT_PLACEMENT = "input+layer-inputs+classifier-input"
MONITOR = "val_loss"


class TrainingAborted(RuntimeError):
    """The run hit a numeric error (non-finite loss) and cannot continue."""


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    val_acc: float

    def to_dict(self) -> dict:
        return {"epoch": self.epoch, "train_loss": self.train_loss,
                "val_loss": self.val_loss, "val_acc": self.val_acc}


@dataclass
class RunResult:
    config: dict
    seed: int
    best_epoch: int
    stopped_epoch: int
    test_accuracy: float
    val_curve: list[EpochStats]
    wall_time: float
    monitor: str = MONITOR
    rng_family: str = RNG_FAMILY
    dropout_placement: str = DROPOUT_PLACEMENT
    degree_buckets: list[tuple[str, int, float]] | None = None
    weight_spectrum: list[float] | None = None
    params: ModelParams | None = field(default=None, repr=False)
    predictions: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = {
            "config": self.config,
            "seed": self.seed,
            "best_epoch": self.best_epoch,
            "stopped_epoch": self.stopped_epoch,
            "test_accuracy": self.test_accuracy,
            "wall_time": self.wall_time,
            "monitor": self.monitor,
            "rng_family": self.rng_family,
            "dropout_placement": self.dropout_placement,
            "val_curve": [e.to_dict() for e in self.val_curve],
        }
        if self.degree_buckets is not None:
            out["degree_buckets"] = [
                {"range": r, "count": c, "accuracy": a} for r, c, a in self.degree_buckets]
        if self.weight_spectrum is not None:
            out["weight_spectrum"] = self.weight_spectrum
        return out


def config_dict(config: ModelConfig) -> dict:
    out = dict(vars(config))
    out["model_kind"] = config.model_kind.value
    return out


def evaluate(config: ModelConfig, params: ModelParams, prop: PropMatrix,
             features, labels: np.ndarray,
             indices: np.ndarray) -> tuple[float, float, np.ndarray]:
    """Eval-mode forward; returns (loss, accuracy, all-node predictions).

    Features may be a dense array or a CSR matrix.
    """
    x = features if isinstance(features, sp.csr_matrix) else TensorNode(features)
    logp = model_forward(config, params, prop, x, training=False)
    loss = ad.nll_loss(logp, labels, indices).item()
    predictions = logp.values.argmax(axis=1)
    accuracy = float((predictions[indices] == labels[indices]).mean())
    return loss, accuracy, predictions


def train(config: ModelConfig, data: DatasetBundle, split_index: int = 0,
          epoch_callback: Callable[[EpochStats], None] | None = None,
          collect_degree_buckets: bool = False,
          collect_weight_spectrum: bool = False) -> RunResult:
    """Train with early stopping on validation loss; restore the best epoch.

    Test accuracy is computed exactly once, at the end, on the restored
    parameters. Identical config/seed/data give identical results.
    """
    start = time.perf_counter()
    split = data.splits[split_index]
    rng = np.random.default_rng(config.seed)
    params = init_params(config, data.features.shape[1], data.num_classes, rng)
    state = AdamState(learning_rate=config.lr,
                      weight_decay={"conv": config.wd_conv, "dense": config.wd_dense})
    for param, group in params.all_params():
        state.register(param, group)

    full_prop = renormalized_operator(data.graph)
    features = sp.csr_matrix(data.features)
    use_dropedge = (config.model_kind is ModelKind.GCN_DROPEDGE and config.drop_edge > 0.0)

    best_loss = np.inf
    best_epoch = 0
    best_snapshot = params.snapshot()
    bad_epochs = 0
    curve: list[EpochStats] = []
    epoch = 0

    for epoch in range(1, config.max_epochs + 1):
        prop = full_prop
        if use_dropedge:
            prop = renormalized_operator(dropedge_sample(data.graph, config.drop_edge, rng))

        tape = Tape(rng)
        try:
            logp = model_forward(config, params, prop, features, training=True,
                                 rng=rng, tape=tape)
            loss = ad.nll_loss(logp, data.labels, split.train)
            tape.backward(loss)
            adam_step(state)
            val_loss, val_acc, _ = evaluate(config, params, full_prop,
                                            features, data.labels, split.val)
        except ad.NumericError as exc:
            raise TrainingAborted(f"numeric failure at epoch {epoch}: {exc}") from exc
        stats = EpochStats(epoch, loss.item(), val_loss, val_acc)
        curve.append(stats)
        if epoch_callback is not None:
            epoch_callback(stats)

        if val_loss < best_loss:
            best_loss = val_loss
            best_epoch = epoch
            best_snapshot = params.snapshot()
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                break

    params.restore(best_snapshot)
    _, test_acc, predictions = evaluate(config, params, full_prop,
                                        features, data.labels, split.test)

    buckets = None
    if collect_degree_buckets:
        buckets = degree_bucket_accuracy(predictions, data.labels, data.graph, split.test)
    spectrum = None
    if collect_weight_spectrum:
        spectrum = [max_singular_value(w)
                    for w in params.conv_weights + params.conv_weights2]

    return RunResult(
        config=config_dict(config),
        seed=config.seed,
        best_epoch=best_epoch,
        stopped_epoch=epoch,
        test_accuracy=test_acc,
        val_curve=curve,
        wall_time=time.perf_counter() - start,
        degree_buckets=buckets,
        weight_spectrum=spectrum,
        params=params,
        predictions=predictions,
    )


def degree_bucket_index(degree: int) -> int:
    """Bucket i covers degrees [2^i, 2^(i+1)); degree 0 is its own leading bucket."""
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    if degree == 0:
        return -1
    return int(degree).bit_length() - 1


def degree_bucket_accuracy(predictions: np.ndarray, labels: np.ndarray,
                           graph, test_indices: np.ndarray) -> list[tuple[str, int, float]]:
    """Accuracy of test nodes grouped by power-of-two degree ranges."""
    test_indices = np.asarray(test_indices, dtype=np.int64)
    if test_indices.size == 0:
        raise DatasetSplitError("empty test set")
    degrees = graph.degrees[test_indices]
    correct = predictions[test_indices] == labels[test_indices]
    table: list[tuple[str, int, float]] = []
    zero = degrees == 0
    if zero.any():
        table.append(("[0,1)", int(zero.sum()), float(correct[zero].mean())))
    for i in range(0, int(degrees.max()).bit_length()):
        lo, hi = 2 ** i, 2 ** (i + 1)
        mask = (degrees >= lo) & (degrees < hi)
        if mask.any():
            table.append((f"[{lo},{hi})", int(mask.sum()), float(correct[mask].mean())))
    return table


@dataclass
class SweepEntry:
    num_layers: int
    seed: int
    result: RunResult | None
    error: str | None = None


@dataclass
class SweepSummary:
    entries: list[SweepEntry]

    def accuracies(self, num_layers: int) -> np.ndarray:
        return np.array([e.result.test_accuracy for e in self.entries
                         if e.num_layers == num_layers and e.result is not None])

    def aggregate(self) -> dict:
        layer_counts = sorted({e.num_layers for e in self.entries})
        rows = []
        for k in layer_counts:
            acc = self.accuracies(k)
            rows.append({
                "num_layers": k,
                "runs": int(acc.size),
                "failures": sum(1 for e in self.entries
                                if e.num_layers == k and e.result is None),
                "mean_accuracy": float(acc.mean()) if acc.size else None,
                "std_accuracy": float(acc.std()) if acc.size else None,
            })
        return {"layers": rows}


def sweep(config: ModelConfig, layer_list: list[int], num_seeds: int,
          data: DatasetBundle, split_index: int = 0,
          run_callback: Callable[[SweepEntry], None] | None = None) -> SweepSummary:
    """Cartesian product of layer counts and seeds; failures are recorded,
    not raised. Run s of any layer count uses seed config.seed + s, so a
    single-element sweep reproduces a direct train call exactly.
    """
    if not layer_list or num_seeds < 1:
        raise ValueError("sweep needs at least one layer count and one seed")
    entries = []
    for num_layers in layer_list:
        for s in range(num_seeds):
            run_config = ModelConfig(**{**vars(config),
                                        "num_layers": num_layers,
                                        "seed": config.seed + s})
            try:
                result = SweepEntry(num_layers, run_config.seed,
                                    train(run_config, data, split_index))
            except (TrainingAborted, ad.NumericError) as exc:
                result = SweepEntry(num_layers, run_config.seed, None, error=str(exc))
            entries.append(result)
            if run_callback is not None:
                run_callback(result)
    return SweepSummary(entries)


def generate_stratified_splits(labels: np.ndarray, num_splits: int,
                               seed: int) -> list[Split]:
    """Per-class 60/20/20 train/val/test splits over the labeled nodes."""
    labels = np.asarray(labels)
    classes = np.unique(labels[labels >= 0])
    if classes.size < 2:
        raise DatasetSplitError("need at least two classes to build splits")
    for cls in classes:
        if (labels == cls).sum() < 5:
            raise DatasetSplitError(
                f"class {int(cls)} has fewer than 5 nodes; cannot split 60/20/20")
    rng = np.random.default_rng(seed)
    splits = []
    for _ in range(num_splits):
        train_idx, val_idx, test_idx = [], [], []
        for cls in classes:
            members = rng.permutation(np.flatnonzero(labels == cls))
            n_train = round(0.6 * members.size)
            n_val = round(0.2 * members.size)
            train_idx.append(members[:n_train])
            val_idx.append(members[n_train:n_train + n_val])
            test_idx.append(members[n_train + n_val:])
        splits.append(Split(train=np.sort(np.concatenate(train_idx)),
                            val=np.sort(np.concatenate(val_idx)),
                            test=np.sort(np.concatenate(test_idx))))
    return splits


@dataclass
class ProtocolResult:
    results: list[RunResult]
    mean_accuracy: float
    std_accuracy: float
    splits_generated: bool

    def to_dict(self) -> dict:
        return {
            "mean_accuracy": self.mean_accuracy,
            "std_accuracy": self.std_accuracy,
            "splits_generated": self.splits_generated,
            "runs": [r.to_dict() for r in self.results],
        }


def full_supervised_protocol(data: DatasetBundle, config: ModelConfig,
                             num_splits: int = 10,
                             split_seed: int | None = None) -> ProtocolResult:
    """Mean accuracy over stratified 60/20/20 splits, generating them when
    the bundle does not already carry enough."""
    generated = False
    if len(data.splits) >= num_splits:
        splits = data.splits[:num_splits]
    else:
        splits = generate_stratified_splits(
            data.labels, num_splits, config.seed if split_seed is None else split_seed)
        generated = True
    work = DatasetBundle(data.name, data.graph, data.features, data.labels,
                         data.num_classes, splits)
    results = []
    for k in range(num_splits):
        run_config = ModelConfig(**{**vars(config), "seed": config.seed + k})
        results.append(train(run_config, work, split_index=k))
    acc = np.array([r.test_accuracy for r in results])
    return ProtocolResult(results, float(acc.mean()), float(acc.std()), generated)
