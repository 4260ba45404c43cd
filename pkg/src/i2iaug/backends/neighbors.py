"""Per-item ranked neighbor lists and their JSONL form."""

from __future__ import annotations

import json

import numpy as np

from .similarity import ItemSimilarity

NeighborLists = dict[str, list[tuple[str, float]]]


def _rank(cols, vals, k):
    # score descending, then column (== sorted item id) ascending
    order = np.lexsort((cols, -vals))[:k]
    return cols[order], vals[order]


def topk_neighbors(similarity: ItemSimilarity, k: int = 200) -> NeighborLists:
    """The ``k`` best-scored neighbors of every item, self excluded."""
    if k < 1:
        raise ValueError("k must be >= 1")
    m = similarity.matrix.tocsr()
    ids = similarity.item_ids
    out = {}
    for r, item in enumerate(ids):
        lo, hi = m.indptr[r], m.indptr[r + 1]
        cols, vals = m.indices[lo:hi], m.data[lo:hi]
        keep = (cols != r) & (vals != 0)
        cols, vals = _rank(cols[keep], vals[keep], k)
        out[item] = [(ids[c], float(v)) for c, v in zip(cols, vals)]
    return out


def bpr_neighbors(model, k: int = 200, block: int = 1024) -> NeighborLists:
    """Top-``k`` items by factor inner product for every item."""
    if k < 1:
        raise ValueError("k must be >= 1")
    q = model.item_factors
    n = len(model.item_ids)
    ids = model.item_ids
    out = {}
    all_cols = np.arange(n)
    for start in range(0, n, block):
        scores = q[start:start + block] @ q.T
        for r in range(scores.shape[0]):
            row = scores[r]
            me = start + r
            cols = all_cols[all_cols != me]
            vals = row[cols]
            if len(vals) > k:
                cut = np.partition(vals, len(vals) - k)[len(vals) - k]
                sel = vals >= cut
                cols, vals = cols[sel], vals[sel]
            cols, vals = _rank(cols, vals, k)
            out[ids[me]] = [(ids[c], float(v)) for c, v in zip(cols, vals)]
    return out


def write_neighbors(lists: NeighborLists, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for item in sorted(lists):
            fh.write(json.dumps({"item_id": item,
                                 "neighbors": [[j, s] for j, s in lists[item]]}) + "\n")


def read_neighbors(path) -> list[tuple[str, list[tuple[str, float]]]]:
    """Read JSONL neighbor lists as (item_id, neighbors) pairs in file order."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                d = json.loads(line)
                out.append((d["item_id"], [(j, float(s)) for j, s in d["neighbors"]]))
    return out
