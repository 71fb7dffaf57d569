"""Generate tiny synthetic datasets in the upstream raw formats.

Planetoid bundles are protocol-2 pickles of scipy CSR matrices, numpy one-hot
label arrays, and a defaultdict adjacency — the same object layout the real
distribution uses. The web-graph fixture mirrors the node/edge text files plus
npz split masks. Run from the converter/ directory:

    python3 scripts/make_fixtures.py
"""

import pickle
from collections import defaultdict
from pathlib import Path

import numpy as np
import scipy.sparse as sp

OUT = Path(__file__).resolve().parent.parent / "test" / "fixtures"


def one_hot(labels, num_classes):
    out = np.zeros((len(labels), num_classes), dtype=np.int32)
    for i, c in enumerate(labels):
        if c >= 0:
            out[i, c] = 1
    return out


def dump(obj, path):
    with open(path, "wb") as f:
        pickle.dump(obj, f, protocol=2)


def make_planetoid(name="toyplanetoid"):
    rng = np.random.default_rng(42)
    d, c = 12, 3
    n_allx, n_tx = 14, 5
    n_train = 6
    # Node 16 of the final graph is an isolated test-range gap: present in the
    # adjacency numbering but absent from test.index. The index file is
    # unsorted; tx/ty rows follow the file order (the reordering quirk).
    test_index = [15, 14, 18, 17, 19]
    n = 20

    dense = (rng.random((n, d)) < 0.35).astype(np.float32)
    dense[16] = 0.0
    labels = rng.integers(0, c, size=n)

    allx = sp.csr_matrix(dense[:n_allx])
    x = sp.csr_matrix(dense[:n_train])
    tx = sp.csr_matrix(dense[test_index])

    ally = one_hot(labels[:n_allx], c)
    y = one_hot(labels[:n_train], c)
    ty = one_hot(labels[test_index], c)

    graph = defaultdict(list)
    edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (7, 8),
             (8, 9), (9, 10), (10, 11), (11, 12), (12, 13), (13, 14), (14, 15),
             (15, 17), (17, 18), (18, 19), (0, 19), (2, 9), (4, 12)]
    for u, v in edges:
        graph[u].append(v)
        graph[v].append(u)
    graph[0].append(0)      # self-reference, must be dropped
    graph[2].append(9)      # duplicate listing, must be deduplicated
    graph[16] = []          # isolated gap node

    out = OUT / "planetoid"
    out.mkdir(parents=True, exist_ok=True)
    dump(x, out / f"ind.{name}.x")
    dump(y, out / f"ind.{name}.y")
    dump(tx, out / f"ind.{name}.tx")
    dump(ty, out / f"ind.{name}.ty")
    dump(allx, out / f"ind.{name}.allx")
    dump(ally, out / f"ind.{name}.ally")
    dump(dict(graph), out / f"ind.{name}.graph")
    (out / f"ind.{name}.test.index").write_text(
        "".join(f"{i}\n" for i in test_index))
    final_labels = labels.tolist()
    final_labels[16] = -1  # gap node carries no one-hot row
    expected = {
        "num_nodes": n, "num_features": d, "num_classes": c,
        "train_size": n_train, "val_size": n_allx - n_train, "test_size": len(test_index),
        "edges": len(edges),
        "labels": final_labels,
    }
    (out / "expected.json").write_text(__import__("json").dumps(expected, indent=2))


def make_webgraph(name="toyweb"):
    rng = np.random.default_rng(7)
    n, d, c = 25, 9, 3
    labels = rng.integers(0, c, size=n)
    feats = (rng.random((n, d)) * 3).astype(np.int64)

    out = OUT / "webgraph"
    out.mkdir(parents=True, exist_ok=True)
    lines = ["node_id\tfeature\tlabel"]
    for i in range(n):
        lines.append(f"{i}\t{','.join(map(str, feats[i]))}\t{labels[i]}")
    (out / "out1_node_feature_label.txt").write_text("\n".join(lines) + "\n")

    edges = [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3), (6, 7), (8, 9),
             (10, 11), (12, 13), (14, 15), (16, 17), (18, 19), (20, 21),
             (22, 23), (23, 24), (1, 1), (2, 0)]  # self-loop + reverse duplicate
    elines = ["node_id\tnode_id"] + [f"{u}\t{v}" for u, v in edges]
    (out / "out1_graph_edges.txt").write_text("\n".join(elines) + "\n")

    for split_id in range(10):
        srng = np.random.default_rng(1000 + split_id)
        train = np.zeros(n, dtype=bool)
        val = np.zeros(n, dtype=bool)
        test = np.zeros(n, dtype=bool)
        for cls in range(c):
            members = srng.permutation(np.flatnonzero(labels == cls))
            k1 = round(0.6 * members.size)
            k2 = round(0.2 * members.size)
            train[members[:k1]] = True
            val[members[k1:k1 + k2]] = True
            test[members[k1 + k2:]] = True
        np.savez(out / f"{name}_split_0.6_0.2_{split_id}.npz",
                 train_mask=train, val_mask=val, test_mask=test)
    expected = {"num_nodes": n, "num_features": d, "num_classes": c,
                "edges": 16, "labels": labels.tolist()}
    (out / "expected.json").write_text(__import__("json").dumps(expected, indent=2))


if __name__ == "__main__":
    make_planetoid()
    make_webgraph()
    print(f"fixtures written under {OUT}")
