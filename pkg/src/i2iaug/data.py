"""Interaction logs, datasets, long-tail labeling and chronological splits."""

from __future__ import annotations

import gzip
import json
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .exceptions import EmptyDatasetError, ParseError, UnknownEntityError

log = logging.getLogger(__name__)

EVENT_TYPES = ("click", "purchase")


@dataclass(frozen=True, slots=True)
class Interaction:
    user_id: str
    item_id: str
    timestamp: int
    event_type: str = "click"
    synthetic: bool = False

    def __post_init__(self):
        if not self.user_id or not self.item_id:
            raise ValueError("user_id and item_id must be non-empty")
        if self.timestamp < 0:
            raise ValueError(f"negative timestamp {self.timestamp}")
        if self.event_type not in EVENT_TYPES:
            raise ValueError(f"unknown event_type {self.event_type!r}")

    def sort_key(self):
        return (self.timestamp, self.item_id)


@dataclass(frozen=True)
class UserHistory:
    """A user's interactions in chronological order plus profile fields."""

    user_id: str
    interactions: tuple[Interaction, ...] = ()
    static_features: Mapping[str, str] = field(default_factory=dict)

    @classmethod
    def from_interactions(cls, user_id, interactions, static_features=None):
        ordered = tuple(sorted(interactions, key=Interaction.sort_key))
        return cls(user_id, ordered, dict(static_features or {}))

    @property
    def item_ids(self) -> list[str]:
        return [x.item_id for x in self.interactions]

    def __len__(self):
        return len(self.interactions)


@dataclass(frozen=True)
class Item:
    item_id: str
    title: str | None = None
    category: str | None = None
    popularity: int = 0
    long_tail: bool = False


class Dataset:
    """Immutable collection of user histories and the item catalog.

    Item popularity always equals the number of interactions referencing the
    item; it is recomputed on construction.
    """

    def __init__(self, users: Mapping[str, UserHistory], items: Mapping[str, Item],
                 duplicates_dropped: int = 0):
        counts = Counter()
        for hist in users.values():
            for x in hist.interactions:
                counts[x.item_id] += 1
        missing = set(counts) - set(items)
        if missing:
            raise UnknownEntityError(f"interactions reference unknown items: {sorted(missing)[:5]}")
        self._users = {u: users[u] for u in sorted(users)}
        self._items = {
            i: replace(items[i], popularity=counts.get(i, 0)) for i in sorted(items)
        }
        self.duplicates_dropped = duplicates_dropped

    @classmethod
    def from_interactions(cls, interactions: Iterable[Interaction],
                          items: Iterable[Item] | None = None,
                          static_features: Mapping[str, Mapping[str, str]] | None = None,
                          long_tail: Iterable[str] | None = None) -> "Dataset":
        by_user = defaultdict(list)
        seen = set()
        dropped = 0
        for x in interactions:
            key = (x.user_id, x.item_id, x.timestamp)
            if key in seen:
                dropped += 1
                continue
            seen.add(key)
            by_user[x.user_id].append(x)
        if dropped:
            log.info("collapsed %d duplicate interactions", dropped)
        static_features = static_features or {}
        users = {
            u: UserHistory.from_interactions(u, xs, static_features.get(u))
            for u, xs in by_user.items()
        }
        catalog = {it.item_id: it for it in (items or ())}
        for xs in by_user.values():
            for x in xs:
                if x.item_id not in catalog:
                    catalog[x.item_id] = Item(x.item_id)
        if long_tail is not None:
            flagged = set(long_tail)
            catalog = {i: replace(it, long_tail=i in flagged) for i, it in catalog.items()}
        return cls(users, catalog, duplicates_dropped=dropped)

    @property
    def users(self) -> Mapping[str, UserHistory]:
        return self._users

    @property
    def items(self) -> Mapping[str, Item]:
        return self._items

    @property
    def user_ids(self) -> list[str]:
        return list(self._users)

    @property
    def item_ids(self) -> list[str]:
        return list(self._items)

    def history(self, user_id) -> UserHistory:
        try:
            return self._users[user_id]
        except KeyError:
            raise UnknownEntityError(f"unknown user {user_id!r}") from None

    def interactions(self) -> Iterator[Interaction]:
        """All interactions, grouped by user id then chronological."""
        for hist in self._users.values():
            yield from hist.interactions

    @property
    def n_interactions(self) -> int:
        return sum(len(h) for h in self._users.values())

    def positives(self, user_id) -> set[str]:
        return set(self.history(user_id).item_ids)

    def is_long_tail(self, item_id) -> bool:
        return self._items[item_id].long_tail

    def long_tail_items(self) -> frozenset[str]:
        return frozenset(i for i, it in self._items.items() if it.long_tail)

    def title(self, item_id) -> str | None:
        it = self._items.get(item_id)
        return it.title if it is not None else None

    def summary(self) -> dict:
        return {
            "users": len(self._users),
            "items": len(self._items),
            "interactions": self.n_interactions,
            "long_tail_items": len(self.long_tail_items()),
        }

    def __repr__(self):
        s = self.summary()
        return (f"Dataset(users={s['users']}, items={s['items']}, "
                f"interactions={s['interactions']}, long_tail_items={s['long_tail_items']})")


def _parse_timestamp(raw, lineno, path):
    try:
        return int(raw)
    except ValueError:
        try:
            value = float(raw)
        except ValueError:
            raise ParseError(f"timestamp {raw!r} is not an integer", lineno, path) from None
        if not value.is_integer():
            raise ParseError(f"timestamp {raw!r} is not an integer", lineno, path)
        return int(value)


def _make_interaction(user_id, item_id, ts, event_type, lineno, path):
    for name, value in (("user_id", user_id), ("item_id", item_id),
                        ("timestamp", ts), ("event_type", event_type)):
        if value is None or (isinstance(value, str) and not value.strip()):
            raise ParseError(f"missing {name}", lineno, path)
    ts = _parse_timestamp(str(ts), lineno, path)
    if ts < 0:
        raise ParseError(f"negative timestamp {ts}", lineno, path)
    event_type = str(event_type).strip().lower()
    if event_type not in EVENT_TYPES:
        raise ParseError(f"unknown event_type {event_type!r}", lineno, path)
    return Interaction(str(user_id).strip(), str(item_id).strip(), ts, event_type)


def read_interactions(path, format=None) -> list[Interaction]:
    """Parse a TSV or JSONL interaction log.

    TSV rows are ``user_id<TAB>item_id<TAB>timestamp<TAB>event_type`` with no
    header; JSONL rows are objects with the same four keys. Blank lines are
    ignored.
    """
    path = Path(path)
    if format is None:
        format = "jsonl" if path.suffix in (".jsonl", ".json") else "tsv"
    if format not in ("tsv", "jsonl"):
        raise ValueError(f"unsupported format {format!r}")
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            if format == "tsv":
                parts = line.split("\t")
                if len(parts) != 4:
                    raise ParseError(f"expected 4 tab-separated fields, got {len(parts)}",
                                     lineno, path)
                out.append(_make_interaction(*parts, lineno, path))
            else:
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"invalid JSON ({exc.msg})", lineno, path) from None
                if not isinstance(rec, dict):
                    raise ParseError("record is not a JSON object", lineno, path)
                out.append(_make_interaction(rec.get("user_id"), rec.get("item_id"),
                                             rec.get("timestamp"), rec.get("event_type"),
                                             lineno, path))
    return out


def read_item_metadata(path) -> list[Item]:
    """Read a JSONL item catalog with ``item_id`` and optional ``title``/``category``."""
    items = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", lineno, path) from None
            if not rec.get("item_id"):
                raise ParseError("missing item_id", lineno, path)
            items.append(Item(str(rec["item_id"]), rec.get("title"), rec.get("category")))
    return items


def ingest(path, format=None, items_path=None) -> Dataset:
    """Load an interaction log into a :class:`Dataset`.

    Duplicate ``(user, item, timestamp)`` records are collapsed. Raises
    :class:`ParseError` naming the offending line, or
    :class:`EmptyDatasetError` when the file holds no records.
    """
    records = read_interactions(path, format)
    if not records:
        raise EmptyDatasetError(f"{path}: no interactions")
    items = read_item_metadata(items_path) if items_path else None
    return Dataset.from_interactions(records, items)


def read_amazon_reviews(path) -> list[Interaction]:
    """Interactions from a public Amazon review dump, as purchase events.

    Accepts the per-category review JSON lines (``reviewerID``, ``asin``,
    ``unixReviewTime``) and the headerless ``user,item,rating,timestamp``
    rating CSVs, optionally gzip-compressed.
    """
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    stem = path.with_suffix("") if path.suffix == ".gz" else path
    out = []
    with opener(path, "rt", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            if stem.suffix == ".csv":
                parts = line.rstrip("\n").split(",")
                if len(parts) != 4:
                    raise ParseError(f"expected 4 comma-separated fields, got {len(parts)}",
                                     lineno, path)
                user, item, ts = parts[0], parts[1], parts[3]
            else:
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"invalid JSON ({exc.msg})", lineno, path) from None
                user, item, ts = rec.get("reviewerID"), rec.get("asin"), rec.get("unixReviewTime")
            out.append(_make_interaction(user, item, ts, "purchase", lineno, path))
    return out


def write_interactions(interactions: Iterable[Interaction], path, format="tsv"):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for x in interactions:
            if format == "tsv":
                fh.write(f"{x.user_id}\t{x.item_id}\t{x.timestamp}\t{x.event_type}\n")
            else:
                fh.write(json.dumps({"user_id": x.user_id, "item_id": x.item_id,
                                     "timestamp": x.timestamp, "event_type": x.event_type},
                                    sort_keys=True) + "\n")


def long_tail_count(n_items, fraction) -> int:
    # Decimal avoids floor(0.29 * 100) == 28
    return math.floor(Decimal(repr(float(fraction))) * n_items)


def label_long_tail(dataset: Dataset, fraction: float = 0.2) -> Dataset:
    """Flag the least popular ``floor(fraction * |items|)`` items as long-tail.

    Items are ranked by ascending popularity with ties broken by ascending
    item id, so the result is deterministic and idempotent.
    """
    if not (0 < fraction <= 1):
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    if not dataset.items:
        raise EmptyDatasetError("cannot label an empty dataset")
    ranked = sorted(dataset.items.values(), key=lambda it: (it.popularity, it.item_id))
    n = long_tail_count(len(ranked), fraction)
    flagged = {it.item_id for it in ranked[:n]}
    items = {i: replace(it, long_tail=i in flagged) for i, it in dataset.items.items()}
    return Dataset(dataset.users, items, dataset.duplicates_dropped)


@dataclass(frozen=True)
class Split:
    """Leave-one-out split: last interaction is test, second-to-last validation.

    Users with fewer than three interactions appear only in ``train``.
    """

    train: Mapping[str, tuple[Interaction, ...]]
    validation: Mapping[str, Interaction]
    test: Mapping[str, Interaction]
    short_users: int = 0

    def train_dataset(self, dataset: Dataset) -> Dataset:
        """The training interactions as a dataset sharing ``dataset``'s catalog."""
        users = {
            u: UserHistory(u, xs, dataset.users[u].static_features)
            for u, xs in self.train.items() if xs
        }
        return Dataset(users, dataset.items)

    def summary(self) -> dict:
        return {
            "train_users": len(self.train),
            "train_interactions": sum(len(v) for v in self.train.values()),
            "eval_users": len(self.test),
            "short_users": self.short_users,
        }


def chronological_split(dataset: Dataset) -> Split:
    train, val, test = {}, {}, {}
    short = 0
    for u, hist in dataset.users.items():
        xs = hist.interactions
        if len(xs) < 3:
            train[u] = xs
            short += 1
            continue
        train[u] = xs[:-2]
        val[u] = xs[-2]
        test[u] = xs[-1]
    return Split(train, val, test, short)


def truncate_history(history: UserHistory, n: int = 10) -> UserHistory:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return UserHistory(history.user_id, history.interactions[-n:], history.static_features)
