"""Generate, judge, filter and merge synthetic user-item interactions."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

from .data import Dataset, Interaction, truncate_history
from .exceptions import EndpointError, UnknownEntityError, UnparseableVerdictError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AugmentationConfig:
    recall_number: int = 3
    confidence_threshold: float = 1.0
    history_window: int = 10
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.recall_number < 1:
            raise ValueError("recall_number must be >= 1")
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ValueError("confidence_threshold must be in [0, 1]")
        if self.history_window < 1:
            raise ValueError("history_window must be >= 1")


@dataclass(frozen=True)
class SyntheticCandidate:
    user_id: str
    item_id: str
    generator_score: float
    confidence: float
    accepted: bool = False
    decision: str = "yes"

    def to_json(self):
        return json.dumps({"user_id": self.user_id, "item_id": self.item_id,
                           "generator_score": self.generator_score,
                           "confidence": self.confidence, "accepted": self.accepted,
                           "decision": self.decision},
                          sort_keys=True)


@dataclass
class AugmentationReport:
    users_processed: int = 0
    candidates_generated: int = 0
    accepted: int = 0
    rejected: int = 0
    skipped_users: int = 0
    duplicates: int = 0

    def to_dict(self):
        return asdict(self)


@dataclass
class AugmentedDataset:
    original: Dataset
    candidates: list[SyntheticCandidate]
    accepted: list[SyntheticCandidate]
    report: AugmentationReport = field(default_factory=AugmentationReport)

    def merged(self) -> list[Interaction]:
        return merge(self.original, self.accepted)

    def merged_view(self):
        yield from self.merged()


def filter_candidates(candidates, threshold: float) -> list[SyntheticCandidate]:
    """Candidates judged yes with confidence at or above ``threshold``, order kept."""
    return [c for c in candidates if c.decision == "yes" and c.confidence >= threshold]


def _augment_user(hist, gen, disc, config):
    window = truncate_history(hist, config.history_window)
    cands = gen.generate(window, config.recall_number)
    out = []
    for item_id, gscore in cands.candidates[:config.recall_number]:
        v = disc.score(window, item_id)
        out.append(SyntheticCandidate(hist.user_id, item_id, float(gscore),
                                      float(v.confidence), False, v.decision))
    return out


def augment(dataset: Dataset, gen, disc, config: AugmentationConfig | None = None,
            users=None) -> AugmentedDataset:
    """Run generator and discriminator over every user and keep confident pairs.

    ``gen`` exposes ``generate(history, n)`` and ``disc`` exposes
    ``score(history, item_id)``. Users whose generator or discriminator call
    fails with an endpoint error are skipped and counted. Candidates that
    repeat one of the user's original items are never accepted.
    """
    config = config or AugmentationConfig()
    user_ids = sorted(users) if users is not None else dataset.user_ids
    report = AugmentationReport()

    def task(u):
        hist = dataset.history(u)
        try:
            return u, _augment_user(hist, gen, disc, config)
        except (EndpointError, UnparseableVerdictError) as exc:
            log.warning("skipping user %s: %s", u, exc)
            return u, None

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(task, user_ids))
    else:
        results = [task(u) for u in user_ids]

    candidates, accepted = [], []
    for u, cands in results:
        if cands is None:
            report.skipped_users += 1
            continue
        report.users_processed += 1
        report.candidates_generated += len(cands)
        positives = dataset.positives(u)
        keep = {c.item_id for c in filter_candidates(cands, config.confidence_threshold)}
        user_accepted = []
        for c in sorted(cands, key=lambda c: c.item_id):
            ok = c.item_id in keep and c.item_id not in positives
            if c.item_id in keep and c.item_id in positives:
                report.duplicates += 1
            c = SyntheticCandidate(c.user_id, c.item_id, c.generator_score, c.confidence,
                                   ok, c.decision)
            candidates.append(c)
            if ok and len(user_accepted) < config.recall_number:
                user_accepted.append(c)
        accepted.extend(user_accepted)
    report.accepted = len(accepted)
    report.rejected = report.candidates_generated - report.accepted
    return AugmentedDataset(dataset, candidates, accepted, report)


def merge(dataset: Dataset, accepted, counts: dict | None = None) -> list[Interaction]:
    """Original interactions followed by one synthetic click per accepted pair.

    Synthetic clicks are timestamped one past the user's last real interaction.
    Pairs repeating an original (user, item) interaction are dropped and
    counted under ``counts["duplicates"]`` when a dict is passed.
    """
    stream = list(dataset.interactions())
    seen = {(x.user_id, x.item_id) for x in stream}
    dropped = 0
    for c in sorted(accepted, key=lambda c: (c.user_id, c.item_id)):
        if c.user_id not in dataset.users:
            raise UnknownEntityError(f"unknown user {c.user_id!r}")
        if c.item_id not in dataset.items:
            raise UnknownEntityError(f"unknown item {c.item_id!r}")
        if (c.user_id, c.item_id) in seen:
            dropped += 1
            continue
        seen.add((c.user_id, c.item_id))
        last = dataset.users[c.user_id].interactions
        ts = (last[-1].timestamp + 1) if last else 0
        stream.append(Interaction(c.user_id, c.item_id, ts, "click", synthetic=True))
    if dropped:
        log.info("merge dropped %d synthetic pairs duplicating real interactions", dropped)
    if counts is not None:
        counts["duplicates"] = dropped
    return stream


def write_candidates(candidates, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for c in candidates:
            fh.write(c.to_json() + "\n")


def read_candidates(path) -> list[SyntheticCandidate]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                d = json.loads(line)
                out.append(SyntheticCandidate(d["user_id"], d["item_id"], d["generator_score"],
                                              d["confidence"], d.get("accepted", True),
                                               d.get("decision", "yes")))
    return out
