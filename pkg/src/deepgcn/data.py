"""Portable dataset directory format: load, validate, save.

A dataset directory contains:
    meta.json     {"name", "num_nodes", "num_features", "num_classes"}
    edges.tsv     one undirected edge per line, "u<TAB>v", u != v, no header
    features.bin  little-endian float32, row-major, num_nodes x num_features
    labels.tsv    "node<TAB>class" lines; nodes absent are unlabeled (-1)
    splits.json   [{"train": [...], "val": [...], "test": [...]}, ...]

Features are widened to float64 and L1 row-normalized at load; rows with
zero norm stay zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import CsrGraph, load_graph

REQUIRED_FILES = ("meta.json", "edges.tsv", "features.bin", "labels.tsv", "splits.json")


class DatasetError(Exception):
    """Invalid or unreadable dataset directory."""


class DatasetFileMissing(DatasetError):
    pass


class DatasetShapeMismatch(DatasetError):
    pass


class DatasetSplitError(DatasetError):
    pass


@dataclass(frozen=True)
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray


@dataclass
class DatasetBundle:
    name: str
    graph: CsrGraph
    features: np.ndarray  # (n, d) float64, L1 row-normalized
    labels: np.ndarray    # (n,) int64, -1 for unlabeled
    num_classes: int
    splits: list[Split]


def _normalize_rows(features: np.ndarray) -> np.ndarray:
    norms = np.abs(features).sum(axis=1, keepdims=True)
    scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    return features * scale


def _check_split(indices: list, n: int, labels: np.ndarray, part: str, k: int) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise DatasetSplitError(f"split {k} {part}: index outside [0, {n})")
    if np.unique(idx).size != idx.size:
        raise DatasetSplitError(f"split {k} {part}: repeated index")
    if idx.size and (labels[idx] < 0).any():
        bad = int(idx[labels[idx] < 0][0])
        raise DatasetSplitError(f"split {k} {part}: node {bad} has no label")
    return idx


def load_dataset(directory: str | Path) -> DatasetBundle:
    directory = Path(directory)
    for fname in REQUIRED_FILES:
        if not (directory / fname).is_file():
            raise DatasetFileMissing(f"{directory / fname} not found")

    meta = json.loads((directory / "meta.json").read_text())
    n, d = int(meta["num_nodes"]), int(meta["num_features"])
    num_classes = int(meta["num_classes"])

    raw = np.fromfile(directory / "features.bin", dtype="<f4")
    if raw.size != n * d:
        raise DatasetShapeMismatch(
            f"features.bin holds {raw.size} values, meta implies {n * d}")
    features = _normalize_rows(raw.astype(np.float64).reshape(n, d))

    edge_text = (directory / "edges.tsv").read_text()
    if edge_text.strip():
        edges = np.array([line.split("\t") for line in edge_text.splitlines() if line],
                         dtype=np.int64)
    else:
        edges = np.zeros((0, 2), dtype=np.int64)
    graph = load_graph(edges, n)

    labels = np.full(n, -1, dtype=np.int64)
    for line in (directory / "labels.tsv").read_text().splitlines():
        if not line:
            continue
        node_s, cls_s = line.split("\t")
        node, cls = int(node_s), int(cls_s)
        if not 0 <= node < n:
            raise DatasetShapeMismatch(f"labels.tsv: node {node} outside [0, {n})")
        if not 0 <= cls < num_classes:
            raise DatasetShapeMismatch(f"labels.tsv: class {cls} outside [0, {num_classes})")
        labels[node] = cls

    splits = []
    for k, blob in enumerate(json.loads((directory / "splits.json").read_text())):
        parts = {part: _check_split(blob[part], n, labels, part, k)
                 for part in ("train", "val", "test")}
        combined = np.concatenate(list(parts.values()))
        if np.unique(combined).size != combined.size:
            raise DatasetSplitError(f"split {k}: train/val/test overlap")
        splits.append(Split(**parts))
    if not splits:
        raise DatasetSplitError("splits.json holds no splits")

    return DatasetBundle(
        name=str(meta.get("name", directory.name)),
        graph=graph,
        features=features,
        labels=labels,
        num_classes=num_classes,
        splits=splits,
    )


def save_dataset(bundle: DatasetBundle, directory: str | Path) -> None:
    """Write a bundle back out in the directory format (features as float32)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    n, d = bundle.features.shape
    (directory / "meta.json").write_text(json.dumps({
        "name": bundle.name,
        "num_nodes": n,
        "num_features": d,
        "num_classes": bundle.num_classes,
    }, indent=2) + "\n")
    edges = bundle.graph.undirected_edges()
    (directory / "edges.tsv").write_text(
        "".join(f"{u}\t{v}\n" for u, v in edges))
    bundle.features.astype("<f4").tofile(directory / "features.bin")
    (directory / "labels.tsv").write_text(
        "".join(f"{i}\t{c}\n" for i, c in enumerate(bundle.labels) if c >= 0))
    (directory / "splits.json").write_text(json.dumps([
        {"train": s.train.tolist(), "val": s.val.tolist(), "test": s.test.tolist()}
        for s in bundle.splits
    ]) + "\n")
