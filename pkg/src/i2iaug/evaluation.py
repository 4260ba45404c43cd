"""Offline Recall@K / NDCG@K through the serving lookup path."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

from .data import Dataset, Split, UserHistory
from .index import DEFAULT_M, InvertedIndex, LookupRequest, build_index

SEGMENTS = ("all", "long_tail", "non_long_tail")


@dataclass(frozen=True)
class RankedPrediction:
    user_id: str
    ranked_items: tuple[str, ...]
    ground_truth: str

    def __post_init__(self):
        object.__setattr__(self, "ranked_items", tuple(self.ranked_items))
        if len(set(self.ranked_items)) != len(self.ranked_items):
            raise ValueError(f"duplicate items in ranking for user {self.user_id!r}")

    def rank(self) -> int | None:
        """1-based position of the ground truth, or None when absent."""
        try:
            return self.ranked_items.index(self.ground_truth) + 1
        except ValueError:
            return None


def _check(predictions, k):
    if k < 1:
        raise ValueError("k must be >= 1")
    if not predictions:
        raise ValueError("no predictions to evaluate")


def recall_terms(predictions, k):
    return [1.0 if (r := p.rank()) is not None and r <= k else 0.0 for p in predictions]


def ndcg_terms(predictions, k):
    # one relevant item per user, so the ideal DCG is 1
    return [1.0 / math.log2(r + 1) if (r := p.rank()) is not None and r <= k else 0.0
            for p in predictions]


# means use fsum: correctly rounded, so independent of summation order and Python version

def recall_at_k(predictions, k: int) -> float:
    _check(predictions, k)
    return math.fsum(recall_terms(predictions, k)) / len(predictions)


def ndcg_at_k(predictions, k: int) -> float:
    _check(predictions, k)
    return math.fsum(ndcg_terms(predictions, k)) / len(predictions)


def metric_names(ks):
    return [f"Recall@{k}" for k in ks] + [f"NDCG@{k}" for k in ks]


@dataclass
class EvalReport:
    ks: tuple[int, ...]
    metrics: dict[str, dict[str, float]]
    counts: dict[str, int]
    excluded_users: int = 0
    config: dict = field(default_factory=dict)
    label: str = ""

    def value(self, metric, segment="all") -> float:
        return self.metrics[segment][metric]

    def to_dict(self):
        return {"label": self.label, "ks": list(self.ks), "metrics": self.metrics,
                "counts": self.counts, "excluded_users": self.excluded_users,
                "config": self.config}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["ks"]), d["metrics"], d["counts"], d.get("excluded_users", 0),
                   d.get("config", {}), d.get("label", ""))

    def to_table(self) -> str:
        return format_table([self])


def format_table(reports, segments=SEGMENTS) -> str:
    """Aligned text with Recall@K columns before NDCG@K columns."""
    if not reports:
        return ""
    names = metric_names(reports[0].ks)
    header = ["run", "segment", "users", *names]
    rows = []
    for r in reports:
        for seg in segments:
            rows.append([r.label or "-", seg, str(r.counts.get(seg, 0)),
                         *(f"{r.metrics[seg][n]:.4f}" for n in names)])
    widths = [max(len(h), *(len(row[c]) for row in rows)) for c, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in rows]
    return "\n".join(lines)


def summarize(predictions, dataset: Dataset, ks, excluded=0, config=None, label="") -> EvalReport:
    """Metrics over all users and split by the ground-truth item's long-tail flag."""
    preds = sorted(predictions, key=lambda p: p.user_id)
    groups = {
        "all": preds,
        "long_tail": [p for p in preds if dataset.items[p.ground_truth].long_tail],
        "non_long_tail": [p for p in preds if not dataset.items[p.ground_truth].long_tail],
    }
    metrics, counts = {}, {}
    for seg, ps in groups.items():
        counts[seg] = len(ps)
        vals = {}
        for k in ks:
            vals[f"Recall@{k}"] = recall_at_k(ps, k) if ps else 0.0
        for k in ks:
            vals[f"NDCG@{k}"] = ndcg_at_k(ps, k) if ps else 0.0
        metrics[seg] = vals
    return EvalReport(tuple(ks), metrics, counts, excluded, dict(config or {}), label)


def predictions_from_index(index: InvertedIndex, split: Split, m: int = DEFAULT_M, n: int = 10,
                           aggregation: str = "sum"):
    """Rank items for every test user from their ``m`` most recent train items.

    Returns (predictions, number of users excluded for an empty train history).
    """
    preds, excluded = [], 0
    for u in sorted(split.test):
        train = split.train.get(u, ())
        if not train:
            excluded += 1
            continue
        recent = [x.item_id for x in reversed(train)]
        resp = index.lookup(LookupRequest(recent, n), m=m, aggregation=aggregation)
        preds.append(RankedPrediction(u, tuple(i for i, _ in resp.items),
                                      split.test[u].item_id))
    return preds, excluded


def evaluate(neighbors, split: Split, dataset: Dataset, m: int = DEFAULT_M, n: int | None = None,
             ks=(5, 10), index_k: int = 200, aggregation: str = "sum", label: str = "",
             config: dict | None = None) -> EvalReport:
    """Evaluate neighbor lists (or a built index) on the split's test items."""
    ks = tuple(sorted(set(ks)))
    n = n or max(ks)
    index = neighbors if isinstance(neighbors, InvertedIndex) else build_index(neighbors, index_k)
    preds, excluded = predictions_from_index(index, split, m, n, aggregation)
    echo = {"m": m, "n": n, "index_k": index.k, "aggregation": aggregation, **(config or {})}
    return summarize(preds, dataset, ks, excluded, echo, label)


def predictions_from_generator(gen, split: Split, dataset: Dataset, n: int = 10):
    """Rank items for every test user straight from a generator's top-``n`` output.

    The generator sees the user's training interactions; returns
    (predictions, number of users excluded for an empty train history).
    """
    preds, excluded = [], 0
    for u in sorted(split.test):
        train = split.train.get(u, ())
        if not train:
            excluded += 1
            continue
        hist = UserHistory(u, tuple(train), dataset.users[u].static_features)
        ranked = gen.generate(hist, n).item_ids[:n]
        preds.append(RankedPrediction(u, tuple(ranked), split.test[u].item_id))
    return preds, excluded


def evaluate_generator(gen, split: Split, dataset: Dataset, n: int | None = None, ks=(5, 10),
                       label: str = "", config: dict | None = None) -> EvalReport:
    """Evaluate a generator used directly as the recommender, with no I2I backend."""
    ks = tuple(sorted(set(ks)))
    n = n or max(ks)
    preds, excluded = predictions_from_generator(gen, split, dataset, n)
    return summarize(preds, dataset, ks, excluded, {"n": n, **(config or {})}, label)


def write_reports_csv(rows, path):
    """Write flat grid rows (dicts) as CSV with a stable column order."""
    if not rows:
        open(path, "w").close()
        return
    cols = list(rows[0])
    for r in rows[1:]:
        cols += [c for c in r if c not in cols]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)
