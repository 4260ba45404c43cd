"""User-item bipartite graph with a per-user click cap."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..data import Interaction


@dataclass
class BipartiteGraph:
    """Binary user x item adjacency stored as CSR; ids are sorted."""

    user_ids: list[str]
    item_ids: list[str]
    matrix: sp.csr_matrix

    def __post_init__(self):
        self.user_index = {u: k for k, u in enumerate(self.user_ids)}
        self.item_index = {i: k for k, i in enumerate(self.item_ids)}
        self._by_item = None

    @property
    def n_users(self):
        return len(self.user_ids)

    @property
    def n_items(self):
        return len(self.item_ids)

    @property
    def n_edges(self):
        return int(self.matrix.nnz)

    def __bool__(self):
        return self.n_edges > 0

    def items_of(self, user_id) -> frozenset[str]:
        k = self.user_index[user_id]
        row = self.matrix.indices[self.matrix.indptr[k]:self.matrix.indptr[k + 1]]
        return frozenset(self.item_ids[j] for j in row)

    def users_of(self, item_id) -> frozenset[str]:
        if self._by_item is None:
            self._by_item = self.matrix.tocsc()
        k = self.item_index[item_id]
        m = self._by_item
        col = m.indices[m.indptr[k]:m.indptr[k + 1]]
        return frozenset(self.user_ids[u] for u in col)


def build_graph(stream, click_cap: int = 1000) -> BipartiteGraph:
    """Build the graph keeping each user's ``click_cap`` most recent interactions."""
    if click_cap < 1:
        raise ValueError("click_cap must be >= 1")
    by_user = defaultdict(list)
    for x in stream:
        by_user[x.user_id].append(x)
    kept = {}
    for u, xs in by_user.items():
        xs.sort(key=Interaction.sort_key)
        kept[u] = {x.item_id for x in xs[-click_cap:]}
    user_ids = sorted(kept)
    item_ids = sorted(set().union(*kept.values())) if kept else []
    item_index = {i: k for k, i in enumerate(item_ids)}
    rows, cols = [], []
    for r, u in enumerate(user_ids):
        cs = sorted(item_index[i] for i in kept[u])
        rows.extend([r] * len(cs))
        cols.extend(cs)
    m = sp.csr_matrix((np.ones(len(rows)), (np.array(rows, dtype=np.int64),
                                            np.array(cols, dtype=np.int64))),
                      shape=(len(user_ids), len(item_ids)))
    m.sort_indices()
    return BipartiteGraph(user_ids, item_ids, m)
