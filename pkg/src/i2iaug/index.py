"""Inverted (item -> top-K neighbors) index with a compact binary file format.

File layout, all little-endian::

    magic      8 bytes  b"I2IINDEX"
    version    1 byte   (1)
    k          u32
    n_keys     u32
    n_strings  u32
    strings    n_strings x (u32 length, utf-8 bytes), sorted ascending
    keys       n_keys x u32          string-table id of each key, ascending
    offsets    (n_keys + 1) x u64    record range of each key
    records    offsets[-1] x (u32 string id, f64 score)

String ids follow sorted order, so comparing ids compares item ids.
"""

from __future__ import annotations

import json
import struct
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .exceptions import IndexFormatError

MAGIC = b"I2IINDEX"
VERSION = 1
RECORD = np.dtype([("id", "<u4"), ("score", "<f8")])
DEFAULT_M = 100


@dataclass
class LookupRequest:
    recent_item_ids: list[str]
    n: int = 10

    def __post_init__(self):
        if not self.recent_item_ids:
            raise ValueError("recent_item_ids must be non-empty")
        if not isinstance(self.n, int) or isinstance(self.n, bool) or self.n < 1:
            raise ValueError("n must be a positive integer")


@dataclass
class LookupResponse:
    items: list[tuple[str, float]] = field(default_factory=list)
    keys_hit: int = 0
    keys_missed: int = 0
    candidates_before_dedup: int = 0

    def to_dict(self):
        return {"items": [[i, s] for i, s in self.items],
                "stats": {"keys_hit": self.keys_hit, "keys_missed": self.keys_missed,
                          "candidates_before_dedup": self.candidates_before_dedup}}


class InvertedIndex:
    """Immutable, array-backed neighbor-list lookup table."""

    def __init__(self, strings, keys, offsets, records, k: int):
        self.strings = list(strings)
        self.keys = np.asarray(keys, dtype="<u4")
        self.offsets = np.asarray(offsets, dtype="<u8")
        self.records = np.asarray(records, dtype=RECORD)
        self.k = int(k)
        self._string_id = {s: n for n, s in enumerate(self.strings)}
        self._slot = {self.strings[s]: n for n, s in enumerate(self.keys.tolist())}
        self._ids = self.records["id"]
        self._scores = self.records["score"]
        for a in (self.keys, self.offsets, self.records):
            a.setflags(write=False)

    @property
    def item_count(self) -> int:
        return len(self.keys)

    def __contains__(self, item_id):
        return item_id in self._slot

    def __len__(self):
        return self.item_count

    def neighbors(self, item_id) -> list[tuple[str, float]]:
        n = self._slot[item_id]
        lo, hi = int(self.offsets[n]), int(self.offsets[n + 1])
        return [(self.strings[i], float(s)) for i, s in zip(self._ids[lo:hi].tolist(),
                                                             self._scores[lo:hi].tolist())]

    def to_lists(self) -> dict[str, list[tuple[str, float]]]:
        return {self.strings[s]: self.neighbors(self.strings[s]) for s in self.keys.tolist()}

    def lookup(self, request: LookupRequest, m: int = DEFAULT_M,
               aggregation: str = "sum") -> LookupResponse:
        """Merge the neighbor lists of the ``m`` most recent items and rank.

        Duplicate candidates are combined by summing (or taking the max of)
        their scores; query items never appear in the result. Missing keys are
        counted, not raised.
        """
        if aggregation not in ("sum", "max"):
            raise ValueError(f"unknown aggregation {aggregation!r}")
        # first occurrence wins, so order stays most-recent-first
        recent = list(dict.fromkeys(request.recent_item_ids))[:m]
        hit, missed, chunks_i, chunks_s = 0, 0, [], []
        for item in recent:
            slot = self._slot.get(item)
            if slot is None:
                missed += 1
                continue
            hit += 1
            lo, hi = int(self.offsets[slot]), int(self.offsets[slot + 1])
            chunks_i.append(self._ids[lo:hi])
            chunks_s.append(self._scores[lo:hi])
        resp = LookupResponse(keys_hit=hit, keys_missed=missed)
        if not chunks_i:
            return resp
        ids = np.concatenate(chunks_i)
        scores = np.concatenate(chunks_s)
        resp.candidates_before_dedup = int(len(ids))
        uniq, inv = np.unique(ids, return_inverse=True)
        if aggregation == "sum":
            agg = np.bincount(inv, weights=scores, minlength=len(uniq))
        else:
            agg = np.full(len(uniq), -np.inf)
            np.maximum.at(agg, inv, scores)
        query = [self._string_id[i] for i in recent if i in self._string_id]
        keep = ~np.isin(uniq, np.array(query, dtype=np.int64))
        uniq, agg = uniq[keep], agg[keep]
        neg = -agg
        pool = np.arange(len(neg))
        if len(neg) > request.n:
            # everything scoring at least the n-th best, ties included
            cut = np.partition(neg, request.n - 1)[request.n - 1]
            pool = np.flatnonzero(neg <= cut)
        # uniq is ascending, so a stable sort on -score breaks ties by item id
        order = pool[np.argsort(neg[pool], kind="stable")][:request.n]
        resp.items = [(self.strings[i], float(s))
                      for i, s in zip(uniq[order].tolist(), agg[order].tolist())]
        return resp

    # construction and I/O

    @classmethod
    def from_arrays(cls, strings, keys, offsets, ids, scores, k):
        records = np.empty(len(ids), dtype=RECORD)
        records["id"] = ids
        records["score"] = scores
        return cls(strings, keys, offsets, records, k)

    @classmethod
    def from_topk(cls, item_ids, neighbors, scores, k=None):
        """Index from dense top-K arrays, row ``r`` holding the list of ``item_ids[r]``.

        ``item_ids`` must be sorted and unique; ``neighbors`` holds row
        positions into it. Rows must already be ranked. Avoids building
        per-entry Python tuples, which matters at 10^5 items x 200 neighbors.
        """
        item_ids = list(item_ids)
        if any(a >= b for a, b in zip(item_ids, item_ids[1:])):
            raise ValueError("item_ids must be sorted and unique")
        neighbors = np.asarray(neighbors)
        scores = np.asarray(scores, dtype=np.float64)
        if neighbors.shape != scores.shape or neighbors.shape[0] != len(item_ids):
            raise ValueError("neighbors and scores must both be (len(item_ids), K)")
        width = neighbors.shape[1]
        k = width if k is None else k
        width = min(width, k)
        neighbors, scores = neighbors[:, :width], scores[:, :width]
        if np.any(neighbors == np.arange(len(item_ids))[:, None]):
            raise ValueError("an item lists itself as a neighbor")
        offsets = np.arange(len(item_ids) + 1, dtype="<u8") * width
        return cls.from_arrays(item_ids, np.arange(len(item_ids), dtype="<u4"), offsets,
                               neighbors.ravel(), scores.ravel(), k)

    def to_bytes(self) -> bytes:
        parts = [MAGIC, bytes([VERSION]),
                 struct.pack("<III", self.k, self.item_count, len(self.strings))]
        for s in self.strings:
            b = s.encode("utf-8")
            parts.append(struct.pack("<I", len(b)))
            parts.append(b)
        parts += [self.keys.astype("<u4").tobytes(), self.offsets.astype("<u8").tobytes(),
                  self.records.tobytes()]
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, buf) -> "InvertedIndex":
        buf = memoryview(buf)
        if bytes(buf[:8]) != MAGIC:
            raise IndexFormatError("bad magic: not an index file")
        if buf[8] != VERSION:
            raise IndexFormatError(f"unsupported index version {buf[8]}")
        try:
            k, n_keys, n_strings = struct.unpack_from("<III", buf, 9)
            pos = 21
            strings = []
            for _ in range(n_strings):
                (n,) = struct.unpack_from("<I", buf, pos)
                pos += 4
                strings.append(bytes(buf[pos:pos + n]).decode("utf-8"))
                pos += n
            keys = np.frombuffer(buf, dtype="<u4", count=n_keys, offset=pos)
            pos += 4 * n_keys
            offsets = np.frombuffer(buf, dtype="<u8", count=n_keys + 1, offset=pos)
            pos += 8 * (n_keys + 1)
            n_rec = int(offsets[-1])
            records = np.frombuffer(buf, dtype=RECORD, count=n_rec, offset=pos)
            pos += RECORD.itemsize * n_rec
        except (struct.error, ValueError, UnicodeDecodeError) as exc:
            raise IndexFormatError(f"truncated or corrupt index: {exc}") from None
        if pos != len(buf):
            raise IndexFormatError(f"{len(buf) - pos} trailing bytes after records")
        return cls(strings, keys, offsets, records, k)

    def write(self, path):
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def read(cls, path) -> "InvertedIndex":
        try:
            data = Path(path).read_bytes()
        except OSError as exc:
            raise IndexFormatError(f"cannot read index {path}: {exc}") from None
        return cls.from_bytes(data)

    def to_json(self) -> str:
        """Debug export: {"k": ..., "entries": {item_id: [[neighbor, score], ...]}}."""
        return json.dumps({"version": VERSION, "k": self.k,
                           "entries": {i: [[j, s] for j, s in ns]
                                       for i, ns in self.to_lists().items()}})


def build_index(neighbor_lists: Mapping[str, list] | Iterable[tuple[str, list]],
                k: int = 200) -> InvertedIndex:
    """Pack neighbor lists into an index, keeping each list's first ``k`` entries.

    Lists must already be ranked. Accepts a mapping or (item_id, neighbors)
    pairs; a repeated key raises ``ValueError``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    pairs = list(neighbor_lists.items()) if isinstance(neighbor_lists, Mapping) \
        else list(neighbor_lists)
    seen = set()
    for item, _ in pairs:
        if item in seen:
            raise ValueError(f"duplicate index key {item!r}")
        seen.add(item)
    pairs.sort(key=lambda p: p[0])
    strings = set(seen)
    for _, ns in pairs:
        strings.update(j for j, _ in ns[:k])
    strings = sorted(strings)
    sid = {s: n for n, s in enumerate(strings)}
    keys = np.array([sid[i] for i, _ in pairs], dtype="<u4")
    lengths = [min(len(ns), k) for _, ns in pairs]
    offsets = np.zeros(len(pairs) + 1, dtype="<u8")
    offsets[1:] = np.cumsum(lengths)
    ids = np.empty(int(offsets[-1]), dtype="<u4")
    scores = np.empty(int(offsets[-1]), dtype="<f8")
    pos = 0
    for (item, ns), n in zip(pairs, lengths):
        for j, s in ns[:n]:
            if j == item:
                raise ValueError(f"item {item!r} lists itself as a neighbor")
            ids[pos] = sid[j]
            scores[pos] = s
            pos += 1
    return InvertedIndex.from_arrays(strings, keys, offsets, ids, scores, k)


def lookup(index: InvertedIndex, request: LookupRequest, m: int = DEFAULT_M,
           aggregation: str = "sum") -> LookupResponse:
    return index.lookup(request, m, aggregation)


class IndexHolder:
    """Holds the live index; ``swap`` replaces it atomically for new requests."""

    def __init__(self, index: InvertedIndex):
        self._index = index
        self._lock = threading.Lock()

    @property
    def index(self) -> InvertedIndex:
        return self._index

    def swap(self, index: InvertedIndex):
        with self._lock:
            self._index = index

    def reload(self, path):
        self.swap(InvertedIndex.read(path))
