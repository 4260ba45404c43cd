"""Planted-cluster interaction data with a known ground truth.

Items are split into disjoint clusters and every user draws their history
from a single cluster. Within a cluster, item popularity follows a Zipf-like
curve and the least popular ``tail_fraction`` of items get an extra damping
factor, so the bottom of the popularity ranking is long-tail by construction.
Optionally each user also prefers a neighbourhood of a cluster-local ring
(``spread``), which gives item-item similarity a finer structure than the
cluster alone, and a fraction of clicks can be replaced by cross-cluster noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, Interaction, Item, label_long_tail
from .discriminator import Verdict
from .generator import CandidateList


@dataclass
class PlantedData:
    dataset: Dataset
    item_cluster: dict[str, int]
    user_cluster: dict[str, int]
    tail_items: frozenset[str]
    noise_pairs: frozenset[tuple[str, str]] = frozenset()

    def same_cluster(self, user_id, item_id) -> bool:
        return self.user_cluster[user_id] == self.item_cluster[item_id]

    def cluster_items(self, cluster) -> list[str]:
        return sorted(i for i, c in self.item_cluster.items() if c == cluster)


def item_id(k):
    return f"i{k:04d}"


def user_id(k):
    return f"u{k:05d}"


def planted_clusters(n_users: int = 5000, n_items: int = 500, n_clusters: int = 20,
                     min_history: int = 3, max_history: int = 12, zipf: float = 0.8,
                     tail_fraction: float = 0.2, tail_weight: float = 0.15,
                     spread: float | None = None, noise: float = 0.0,
                     clean_holdout: bool = True, seed: int = 0) -> PlantedData:
    """Sample a planted-cluster dataset (already labeled for long-tail).

    History lengths are uniform on ``[min_history, max_history]``; items
    within a history are distinct. With ``clean_holdout`` the last two
    interactions of each user are never noise, so held-out items reflect the
    planted preference.
    """
    rng = np.random.default_rng(seed)
    items = [item_id(k) for k in range(n_items)]
    cluster_of = {items[k]: k % n_clusters for k in range(n_items)}
    members = [[k for k in range(n_items) if k % n_clusters == c] for c in range(n_clusters)]

    weights, positions, tail = [], [], set()
    for c, ks in enumerate(members):
        size = len(ks)
        rank = np.arange(size)
        w = 1.0 / (rank + 1.0) ** zipf
        n_tail = int(round(tail_fraction * size))
        if n_tail:
            w[size - n_tail:] *= tail_weight
            tail.update(items[ks[r]] for r in range(size - n_tail, size))
        weights.append(w)
        positions.append(rng.permutation(size))

    interactions, user_cluster, noise_pairs = [], {}, set()
    for n in range(n_users):
        u = user_id(n)
        c = int(rng.integers(n_clusters))
        user_cluster[u] = c
        ks = members[c]
        size = len(ks)
        w = weights[c].copy()
        if spread is not None:
            centre = rng.integers(size)
            d = np.abs(positions[c] - centre)
            d = np.minimum(d, size - d)
            w *= np.exp(-0.5 * (d / spread) ** 2)
        length = int(rng.integers(min_history, max_history + 1))
        length = min(length, size)
        picks = rng.choice(size, size=length, replace=False, p=w / w.sum())
        seq = [items[ks[r]] for r in picks]
        used = set(seq)
        for t in range(length):
            if noise and not (clean_holdout and t >= length - 2) and rng.random() < noise:
                while True:
                    j = items[int(rng.integers(n_items))]
                    if cluster_of[j] != c and j not in used:
                        break
                used.add(j)
                noise_pairs.add((u, j))
                seq[t] = j
        for t, i in enumerate(seq):
            interactions.append(Interaction(u, i, t + 1, "click"))

    ds = Dataset.from_interactions(interactions, [Item(i, f"item {i}", f"cluster {cluster_of[i]}")
                                                  for i in items])
    ds = label_long_tail(ds, tail_fraction)
    return PlantedData(ds, cluster_of, user_cluster, frozenset(tail), frozenset(noise_pairs))


class OracleDiscriminator:
    """Judge whose confidence is the planted plausibility of a pair.

    Within-cluster pairs get ``within`` and cross-cluster pairs ``across``.
    The verdict is yes whenever confidence reaches ``yes_floor``, so a low
    floor behaves like an endpoint that answers yes to almost everything but
    reports how sure it is.
    """

    def __init__(self, planted: PlantedData, within: float = 1.0, across: float = 0.2,
                 yes_floor: float = 0.0):
        self.planted = planted
        self.within = within
        self.across = across
        self.yes_floor = yes_floor

    def score(self, history, item_id):
        conf = self.within if self.planted.same_cluster(history.user_id, item_id) else self.across
        return Verdict(history.user_id, item_id, "yes" if conf >= self.yes_floor else "no", conf)


class NoisyGenerator:
    """Wraps a generator and swaps later-ranked candidates for random items.

    The candidate at 1-based rank r is replaced with probability
    ``min(1, max(0, r - clean_ranks) * rate)`` by a uniformly drawn item, so
    asking for more candidates yields progressively noisier output.
    """

    def __init__(self, base, item_ids, clean_ranks: int = 2, rate: float = 0.15, seed: int = 0):
        self.base = base
        self.item_ids = sorted(item_ids)
        self.clean_ranks = clean_ranks
        self.rate = rate
        self.seed = seed

    def generate(self, history, n):
        cands = self.base.generate(history, n)
        # per-user stream keeps the output independent of call order
        rng = np.random.default_rng([self.seed, _stable_hash(history.user_id)])
        taken = set(history.item_ids)
        out = []
        for r, (i, s) in enumerate(cands.candidates, start=1):
            p = min(1.0, max(0, r - self.clean_ranks) * self.rate)
            if rng.random() < p:
                while True:
                    j = self.item_ids[int(rng.integers(len(self.item_ids)))]
                    if j not in taken:
                        break
                i = j
            if i in taken:
                continue
            taken.add(i)
            out.append((i, s))
        return CandidateList(cands.user_id, out)


def _stable_hash(s: str) -> int:
    h = 2166136261
    for ch in s.encode("utf-8"):
        h = ((h ^ ch) * 16777619) & 0xFFFFFFFF
    return h
