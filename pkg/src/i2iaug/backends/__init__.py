"""Item-to-item similarity backends: Swing, BM25 and BPR."""

from __future__ import annotations

from dataclasses import dataclass, field

from .bpr import BprConfig, BprModel, train_bpr, triple_loss
from .graph import BipartiteGraph, build_graph
from .neighbors import NeighborLists, bpr_neighbors, read_neighbors, topk_neighbors, write_neighbors
from .similarity import ItemSimilarity, bm25_similarity, bm25_weights, swing_similarity

BACKENDS = ("swing", "bm25", "bpr")


@dataclass(frozen=True)
class BackendConfig:
    name: str = "swing"
    click_cap: int = 1000
    smoothing: float = 1.0
    k1: float = 20.0
    b: float = 0.75
    bpr: BprConfig = field(default_factory=BprConfig)
    top_k: int = 200

    def __post_init__(self):
        if self.name not in BACKENDS:
            raise ValueError(f"unknown backend {self.name!r}; expected one of {BACKENDS}")


def build_neighbors(stream, config: BackendConfig | None = None) -> NeighborLists:
    """Run the configured backend over an interaction stream."""
    config = config or BackendConfig()
    stream = list(stream)
    if config.name == "bpr":
        capped = build_graph(stream, config.click_cap)
        edges = [_Edge(u, i) for u in capped.user_ids for i in sorted(capped.items_of(u))]
        return bpr_neighbors(train_bpr(edges, config.bpr), config.top_k)
    graph = build_graph(stream, config.click_cap)
    if config.name == "swing":
        sim = swing_similarity(graph, config.smoothing)
    else:
        sim = bm25_similarity(graph, config.k1, config.b)
    return topk_neighbors(sim, config.top_k)


@dataclass(frozen=True)
class _Edge:
    user_id: str
    item_id: str


__all__ = [
    "BACKENDS", "BackendConfig", "BipartiteGraph", "BprConfig", "BprModel", "ItemSimilarity",
    "NeighborLists", "bm25_similarity", "bm25_weights", "bpr_neighbors", "build_graph",
    "build_neighbors", "read_neighbors", "swing_similarity", "topk_neighbors", "train_bpr",
    "triple_loss", "write_neighbors",
]
