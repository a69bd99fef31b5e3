"""Undirected call graphs, combinatorial Laplacians and CFG edge vectors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .features import ProgramFeatures


@dataclass(frozen=True, eq=False)
class UndirectedGraph:
    """Simple undirected graph on vertices ``0..n_vertices-1``.

    ``edges`` is an ``(m, 2)`` int array of unique pairs with ``u < v``,
    sorted lexicographically.
    """

    n_vertices: int
    edges: np.ndarray

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    @classmethod
    def from_pairs(cls, n_vertices: int, pairs) -> "UndirectedGraph":
        arr = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2)
        if arr.size and (arr.min() < 0 or arr.max() >= n_vertices):
            raise ValueError("edge endpoint out of range")
        arr = arr[arr[:, 0] != arr[:, 1]]
        arr = np.sort(arr, axis=1)
        arr = np.unique(arr, axis=0) if arr.size else np.empty((0, 2), dtype=np.int64)
        return cls(n_vertices, arr)


def undirected_call_graph(p: ProgramFeatures) -> UndirectedGraph:
    """Symmetrize the call graph; local and external nodes both become vertices.

    Vertex ``i`` is the ``i``-th node of ``p.call_graph.nodes``. Self-loops
    (recursive calls) are dropped and parallel/opposite calls collapse.
    """
    index = {node.id: i for i, node in enumerate(p.call_graph.nodes)}
    pairs = [(index[u], index[v]) for u, v in p.call_graph.edges]
    return UndirectedGraph.from_pairs(len(index), pairs)


def laplacian(g: UndirectedGraph) -> sp.csr_matrix:
    """Combinatorial Laplacian ``D - A`` as a symmetric CSR matrix."""
    n = g.n_vertices
    u, v = g.edges[:, 0], g.edges[:, 1]
    ones = np.ones(len(u))
    adj = sp.coo_matrix((np.concatenate([ones, ones]), (np.concatenate([u, v]), np.concatenate([v, u]))), shape=(n, n))
    adj = adj.tocsr()
    degree = np.asarray(adj.sum(axis=1)).ravel()
    return (sp.diags(degree) - adj).tocsr()


def cfg_edge_vector(p: ProgramFeatures) -> np.ndarray:
    """CFG edge counts of local functions, sorted descending."""
    counts = np.array([f.cfg_edge_count for f in p.functions], dtype=np.int64)
    return -np.sort(-counts)
