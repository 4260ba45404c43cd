"""Sparse item-item similarity: Swing and BM25.

Both computations touch only co-clicked item pairs and return an exactly
symmetric matrix: the upper triangle is computed once and mirrored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import BipartiteGraph


@dataclass
class ItemSimilarity:
    item_ids: list[str]
    matrix: sp.csr_matrix

    def __post_init__(self):
        self.item_index = {i: k for k, i in enumerate(self.item_ids)}

    def get(self, a, b) -> float:
        return float(self.matrix[self.item_index[a], self.item_index[b]])

    def to_dict(self) -> dict[tuple[str, str], float]:
        m = self.matrix.tocoo()
        return {(self.item_ids[r], self.item_ids[c]): float(v)
                for r, c, v in zip(m.row, m.col, m.data)}


def _mirror_upper(s: sp.spmatrix) -> sp.csr_matrix:
    upper = sp.triu(s, k=1).tocsr()
    upper.eliminate_zeros()
    full = (upper + upper.T).tocsr()
    full.sort_indices()
    return full


def swing_similarity(graph: BipartiteGraph, smoothing: float = 1.0,
                     block_users: int = 2048) -> ItemSimilarity:
    """Swing score of every co-clicked item pair.

    ``sim(i, j)`` sums ``1 / (smoothing + |items(u) & items(v)|)`` over the
    unordered user pairs {u, v} that both clicked i and j. User pairs are
    enumerated block by block from ``A @ A.T`` so memory stays bounded.
    """
    if smoothing <= 0:
        raise ValueError("smoothing must be positive")
    a = graph.matrix.tocsr().astype(np.float64)
    n_users, n_items = a.shape
    total = sp.csr_matrix((n_items, n_items))
    at = a.T.tocsr()
    for start in range(0, n_users, block_users):
        stop = min(start + block_users, n_users)
        overlap = (a[start:stop] @ at).tocoo()
        pu = overlap.row.astype(np.int64) + start
        pv = overlap.col.astype(np.int64)
        keep = (pv > pu) & (overlap.data >= 2)
        if not keep.any():
            continue
        pu, pv, cnt = pu[keep], pv[keep], overlap.data[keep]
        order = np.lexsort((pv, pu))
        pu, pv, cnt = pu[order], pv[order], cnt[order]
        shared = a[pu].multiply(a[pv]).tocsr()
        weights = sp.diags(1.0 / (smoothing + cnt))
        total = total + (shared.T @ weights @ shared)
    return ItemSimilarity(list(graph.item_ids), _mirror_upper(total))


def bm25_weights(graph: BipartiteGraph, k1: float = 20.0, b: float = 0.75) -> sp.csr_matrix:
    """Item x user BM25 weights with items as documents and users as terms.

    ``idf(u) = ln((N - n_u + 0.5) / (n_u + 0.5) + 1)`` with N items and n_u
    the number of items user u clicked; term frequency is 1 for every edge.
    """
    if k1 <= 0 or not 0.0 <= b <= 1.0:
        raise ValueError("k1 must be positive and b in [0, 1]")
    docs = graph.matrix.T.tocsr().astype(np.float64)
    n_items = docs.shape[0]
    n_u = np.asarray(graph.matrix.sum(axis=1)).ravel()
    idf = np.log((n_items - n_u + 0.5) / (n_u + 0.5) + 1.0)
    doc_len = np.diff(docs.indptr).astype(np.float64)
    avg_len = doc_len.mean() if n_items else 1.0
    norm = k1 * (1.0 - b + b * doc_len / avg_len)
    row_of = np.repeat(np.arange(n_items), np.diff(docs.indptr))
    tf = docs.data
    docs.data = idf[docs.indices] * tf * (k1 + 1.0) / (tf + norm[row_of])
    return docs


def bm25_similarity(graph: BipartiteGraph, k1: float = 20.0, b: float = 0.75) -> ItemSimilarity:
    """``sim(i, j) = sum over shared users u of w(i, u) * w(j, u)``."""
    w = bm25_weights(graph, k1, b)
    return ItemSimilarity(list(graph.item_ids), _mirror_upper(w @ w.T))
