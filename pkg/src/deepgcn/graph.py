"""Sparse graph construction and the renormalized propagation operators.

Graphs are undirected and unweighted, stored in compressed sparse row form
with both arc directions materialized so that row-wise kernels never branch
on symmetry. The derived operators (renormalized convolution matrix, its
Laplacian, and the lazy-walk matrix) live on the self-looped graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from . import _kernels as kernels


class GraphError(ValueError):
    """Invalid graph input."""


class NodeIndexError(GraphError):
    """An edge endpoint is outside [0, num_nodes)."""


class SelfLoopError(GraphError):
    """The base graph may not contain self-loops."""


class DuplicateEdgeError(GraphError):
    """An undirected edge was listed more than once (in either direction)."""


@dataclass(frozen=True)
class CsrGraph:
    """Immutable undirected graph in CSR form.

    `num_edges` counts undirected edges; both directions are stored, so
    `row_offsets[num_nodes] == 2 * num_edges`. `degrees` excludes self-loops
    (the base graph has none by construction).
    """

    num_nodes: int
    num_edges: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    degrees: np.ndarray

    def neighbors(self, u: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[u]:self.row_offsets[u + 1]]

    def arc_rows(self) -> np.ndarray:
        """Row index of every stored arc (CSR expansion)."""
        return np.repeat(np.arange(self.num_nodes), self.degrees)

    def undirected_edges(self) -> np.ndarray:
        """(m, 2) array of undirected edges with u < v, row-major sorted."""
        rows = self.arc_rows()
        keep = rows < self.col_indices
        return np.column_stack([rows[keep], self.col_indices[keep]])

    def adjacency_dense(self) -> np.ndarray:
        a = np.zeros((self.num_nodes, self.num_nodes))
        a[self.arc_rows(), self.col_indices] = 1.0
        return a

    def is_connected(self) -> bool:
        """Breadth-first reachability from node 0 (empty graph counts as connected)."""
        n = self.num_nodes
        if n <= 1:
            return True
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        frontier = [0]
        while frontier:
            nxt = []
            for u in frontier:
                for v in self.neighbors(u):
                    if not seen[v]:
                        seen[v] = True
                        nxt.append(int(v))
            frontier = nxt
        return bool(seen.all())


class MatrixKind(Enum):
    RENORMALIZED = "renormalized"
    LAPLACIAN = "laplacian"
    LAZY_WALK = "lazy_walk"


@dataclass
class PropMatrix:
    """Symmetric weighted CSR operator over the self-looped graph."""

    kind: MatrixKind
    num_nodes: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    _csr: sp.csr_matrix | None = field(default=None, repr=False, compare=False)

    def csr(self) -> sp.csr_matrix:
        if self._csr is None:
            n = self.num_nodes
            self._csr = sp.csr_matrix(
                (self.values, self.col_indices, self.row_offsets), shape=(n, n)
            )
        return self._csr

    def matmul(self, dense: np.ndarray) -> np.ndarray:
        if dense.ndim == 2:
            res = kernels.csr_matmul(self.row_offsets, self.col_indices,
                                     self.values, dense)
            if res is not None:
                return res[0]
        return self.csr() @ dense

    def matmul_with_total(self, dense: np.ndarray) -> tuple[np.ndarray, float]:
        """Product plus the output total (used as a cheap finiteness probe)."""
        res = kernels.csr_matmul(self.row_offsets, self.col_indices,
                                 self.values, dense)
        if res is None:
            out = self.csr() @ dense
            return out, float(out.sum())
        return res

    def dense(self) -> np.ndarray:
        return self.csr().toarray()


def load_graph(edge_list: Iterable[Sequence[int]] | np.ndarray, num_nodes: int) -> CsrGraph:
    """Build a validated CsrGraph from an undirected edge list.

    Each edge must appear exactly once (either orientation), endpoints in
    range, no self-loops. Both arc directions are stored.
    """
    if num_nodes < 0:
        raise GraphError(f"num_nodes must be nonnegative, got {num_nodes}")
    edges = np.asarray(list(edge_list) if not isinstance(edge_list, np.ndarray) else edge_list,
                       dtype=np.int64)
    if edges.size == 0:
        edges = edges.reshape(0, 2)
    if edges.ndim != 2 or edges.shape[1] != 2:
        raise GraphError(f"edge list must be (m, 2)-shaped, got {edges.shape}")

    if edges.size and (edges.min() < 0 or edges.max() >= num_nodes):
        bad = edges[(edges < 0).any(axis=1) | (edges >= num_nodes).any(axis=1)][0]
        raise NodeIndexError(f"edge {tuple(bad)} outside [0, {num_nodes})")
    if (edges[:, 0] == edges[:, 1]).any():
        u = int(edges[edges[:, 0] == edges[:, 1]][0, 0])
        raise SelfLoopError(f"self-loop ({u}, {u}) not allowed")

    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]

    if rows.size:
        dup = (rows[1:] == rows[:-1]) & (cols[1:] == cols[:-1])
        if dup.any():
            i = int(np.flatnonzero(dup)[0])
            raise DuplicateEdgeError(f"duplicate edge ({rows[i]}, {cols[i]})")

    degrees = np.bincount(rows, minlength=num_nodes).astype(np.int64)
    row_offsets = np.zeros(num_nodes + 1, dtype=np.int64)
    np.cumsum(degrees, out=row_offsets[1:])
    return CsrGraph(
        num_nodes=num_nodes,
        num_edges=edges.shape[0],
        row_offsets=row_offsets,
        col_indices=cols,
        degrees=degrees,
    )


def _self_looped_structure(g: CsrGraph) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """CSR structure of the graph with one self-loop per node; returns (offsets, rows, cols)."""
    n = g.num_nodes
    rows = np.concatenate([g.arc_rows(), np.arange(n, dtype=np.int64)])
    cols = np.concatenate([g.col_indices, np.arange(n, dtype=np.int64)])
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=offsets[1:])
    return offsets, rows, cols


def renormalized_operator(g: CsrGraph) -> PropMatrix:
    """Symmetrically normalized convolution matrix of the self-looped graph.

    Entry (i, j) is ((d_i + 1)(d_j + 1))^(-1/2) for every arc of the
    self-looped graph, including the diagonal. The per-node factor is
    computed once so symmetric entries are bit-identical.
    """
    offsets, rows, cols = _self_looped_structure(g)
    inv_sqrt = 1.0 / np.sqrt(g.degrees + 1.0)
    values = inv_sqrt[rows] * inv_sqrt[cols]
    return PropMatrix(MatrixKind.RENORMALIZED, g.num_nodes, offsets, cols, values)


def laplacian_operator(g: CsrGraph) -> PropMatrix:
    """Normalized Laplacian of the self-looped graph: identity minus the renormalized operator."""
    p = renormalized_operator(g)
    rows = np.repeat(np.arange(g.num_nodes), np.diff(p.row_offsets))
    values = -p.values
    diag = rows == p.col_indices
    values[diag] = 1.0 - p.values[diag]
    return PropMatrix(MatrixKind.LAPLACIAN, g.num_nodes, p.row_offsets, p.col_indices, values)


def lazy_walk_operator(g: CsrGraph) -> PropMatrix:
    """Symmetric lazy-walk matrix: average of identity and the renormalized operator."""
    p = renormalized_operator(g)
    rows = np.repeat(np.arange(g.num_nodes), np.diff(p.row_offsets))
    values = 0.5 * p.values
    diag = rows == p.col_indices
    values[diag] = 0.5 * (1.0 + p.values[diag])
    return PropMatrix(MatrixKind.LAZY_WALK, g.num_nodes, p.row_offsets, p.col_indices, values)


def dropedge_sample(g: CsrGraph, drop_rate: float, rng: np.random.Generator) -> CsrGraph:
    """Independently retain each undirected edge with probability 1 - drop_rate.

    Both directions of an edge are kept or dropped together. The result is
    revalidated; callers must rebuild operators from it, since the
    renormalization depends on the sampled degrees.
    """
    if not 0.0 <= drop_rate < 1.0:
        raise GraphError(f"drop_rate must be in [0, 1), got {drop_rate}")
    edges = g.undirected_edges()
    keep = rng.random(edges.shape[0]) >= drop_rate
    return load_graph(edges[keep], g.num_nodes)
