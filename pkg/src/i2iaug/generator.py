"""Next-item candidate generators.

Two implementations share the ``generate(history, n) -> CandidateList`` port:

* :class:`GeneratorModel`, a local softmax model whose user state is the mean
  embedding of the history items. It is trained on every (history prefix,
  next item) pair with a cross-entropy loss that is multiplied by ``alpha``
  when the target is a long-tail item and by ``beta`` otherwise.
* :class:`RemoteGenerator`, which renders a prompt, calls a chat-completion
  endpoint and keeps only item ids found in the catalog.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset, Split, UserHistory, truncate_history
from .exceptions import EmptyDatasetError, UnknownEntityError
from .prompts import DEFAULT_GENERATION, HISTORY_WINDOW, PromptTemplate, build_generation_prompt

log = logging.getLogger(__name__)

MODEL_FORMAT = "i2iaug.generator"
MODEL_VERSION = 1


@dataclass(frozen=True)
class GeneratorConfig:
    dim: int = 64
    learning_rate: float = 0.05
    epochs: int = 10
    alpha: float = 4.0
    beta: float = 1.0
    seed: int = 0
    init_scale: float = 0.01

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass
class CandidateList:
    user_id: str
    candidates: list[tuple[str, float]] = field(default_factory=list)
    dropped: int = 0

    @property
    def item_ids(self):
        return [i for i, _ in self.candidates]

    def __len__(self):
        return len(self.candidates)


def _history_ids(history) -> list[str]:
    if isinstance(history, UserHistory):
        return history.item_ids
    return list(history)


def _softmax(z):
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def _logsumexp(z):
    m = z.max()
    return m + np.log(np.exp(z - m).sum())


class GeneratorModel:
    """Mean-of-history embedding scored against every item embedding plus a bias.

    ``score(j | h) = <mean(E[h]), E[j]> + b[j]``; the same embedding table is
    used on the input and output side.
    """

    def __init__(self, item_ids, embeddings, bias, config: GeneratorConfig | None = None):
        self.item_ids = list(item_ids)
        self.index = {i: k for k, i in enumerate(self.item_ids)}
        if len(self.index) != len(self.item_ids):
            raise ValueError("duplicate item ids")
        if self.item_ids != sorted(self.item_ids):
            # column order doubles as the id tie-break
            raise ValueError("item ids must be sorted")
        self.embeddings = np.asarray(embeddings, dtype=np.float64)
        self.bias = np.asarray(bias, dtype=np.float64)
        self.config = config or GeneratorConfig(dim=self.embeddings.shape[1])
        self.loss_history: list[float] = []
        self.samples_per_epoch = 0

    @classmethod
    def initialize(cls, item_ids, config: GeneratorConfig):
        item_ids = sorted(item_ids)
        rng = np.random.default_rng(config.seed)
        emb = rng.uniform(-config.init_scale, config.init_scale, (len(item_ids), config.dim))
        return cls(item_ids, emb, np.zeros(len(item_ids)), config)

    def __len__(self):
        return len(self.item_ids)

    def indices(self, history) -> np.ndarray:
        """Column indices of the known history items (unknown ones are skipped)."""
        return np.array([self.index[i] for i in _history_ids(history) if i in self.index],
                        dtype=np.int64)

    def target_index(self, item_id) -> int:
        try:
            return self.index[item_id]
        except KeyError:
            raise UnknownEntityError(f"unknown item {item_id!r}") from None

    def user_state(self, hist_idx) -> np.ndarray:
        if len(hist_idx) == 0:
            return np.zeros(self.embeddings.shape[1])
        return self.embeddings[hist_idx].mean(axis=0)

    def logits(self, history) -> np.ndarray:
        idx = history if isinstance(history, np.ndarray) else self.indices(history)
        return self.embeddings @ self.user_state(idx) + self.bias

    def probabilities(self, history) -> np.ndarray:
        return _softmax(self.logits(history))

    def loss_and_grad(self, hist_idx, target, weight=1.0):
        """Weighted cross-entropy and its dense gradients (dE, db)."""
        h = self.user_state(hist_idx)
        z = self.embeddings @ h + self.bias
        loss = weight * (_logsumexp(z) - z[target])
        dz = _softmax(z)
        dz[target] -= 1.0
        dz *= weight
        g_emb = np.outer(dz, h)
        if len(hist_idx):
            np.add.at(g_emb, hist_idx, (self.embeddings.T @ dz) / len(hist_idx))
        return float(loss), g_emb, dz

    def _sgd_step(self, hist_idx, target, weight, lr) -> float:
        h = self.user_state(hist_idx)
        z = self.embeddings @ h + self.bias
        p = _softmax(z)
        loss = weight * (_logsumexp(z) - z[target])
        dz = p
        dz[target] -= 1.0
        dz *= weight
        dh = self.embeddings.T @ dz
        self.embeddings -= lr * np.outer(dz, h)
        self.bias -= lr * dz
        if len(hist_idx):
            np.subtract.at(self.embeddings, hist_idx, lr * dh / len(hist_idx))
        return float(loss)

    def generate(self, history, n: int, window: int = HISTORY_WINDOW) -> CandidateList:
        """Top-``n`` items by score, excluding the truncated input history."""
        user_id = history.user_id if isinstance(history, UserHistory) else ""
        if isinstance(history, UserHistory):
            history = truncate_history(history, window)
        ids = _history_ids(history)[-window:]
        if n <= 0:
            return CandidateList(user_id, [])
        hist_idx = self.indices(ids)
        scores = self.logits(hist_idx)
        order = np.argsort(-scores, kind="stable")
        excluded = set(hist_idx.tolist())
        out = []
        for k in order:
            if k in excluded:
                continue
            out.append((self.item_ids[k], float(scores[k])))
            if len(out) == n:
                break
        return CandidateList(user_id, out)

    # persistence

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "config": asdict(self.config),
            "item_index": self.item_ids,
            "embeddings": self.embeddings.tolist(),
            "bias": self.bias.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != MODEL_FORMAT or d.get("version") != MODEL_VERSION:
            raise ValueError(f"not a generator model v{MODEL_VERSION}: "
                             f"{d.get('format')} v{d.get('version')}")
        emb = np.array(d["embeddings"], dtype=np.float64).reshape(len(d["item_index"]), -1)
        return cls(d["item_index"], emb, d["bias"], GeneratorConfig(**d["config"]))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def weighted_loss(model: GeneratorModel, history, target, is_long_tail: bool) -> float:
    """Cross-entropy of ``target`` given ``history``, scaled by alpha or beta."""
    t = model.target_index(target)
    hist_idx = model.indices(history)
    if len(hist_idx) == 0:
        raise ValueError("history must contain at least one known item")
    w = model.config.alpha if is_long_tail else model.config.beta
    loss, _, _ = model.loss_and_grad(hist_idx, t, w)
    return loss


def training_pairs(model: GeneratorModel, dataset: Dataset, split: Split):
    """(user sequence, prefix length, target index, weight) for every train position."""
    cfg = model.config
    pairs = []
    for u in sorted(split.train):
        seq = model.indices([x.item_id for x in split.train[u]])
        for t in range(1, len(seq)):
            target = seq[t]
            lt = dataset.items[model.item_ids[target]].long_tail
            pairs.append((seq, t, int(target), cfg.alpha if lt else cfg.beta))
    return pairs


def mean_training_loss(model, pairs) -> float:
    if not pairs:
        return 0.0
    total = 0.0
    for seq, t, target, w in pairs:
        total += model.loss_and_grad(seq[:t], target, w)[0]
    return total / len(pairs)


def train_generator(dataset: Dataset, split: Split, config: GeneratorConfig | None = None,
                    item_ids=None) -> GeneratorModel:
    """Fit the local generator with plain SGD over shuffled prefix/next-item pairs.

    ``model.loss_history`` holds the mean loss at initialization followed by the
    running mean loss of each epoch.
    """
    config = config or GeneratorConfig()
    model = GeneratorModel.initialize(item_ids if item_ids is not None else dataset.item_ids,
                                      config)
    pairs = training_pairs(model, dataset, split)
    if not pairs:
        raise EmptyDatasetError("train split has no (history, next item) pairs")
    model.samples_per_epoch = len(pairs)
    model.loss_history = [mean_training_loss(model, pairs)]
    rng = np.random.default_rng([config.seed, 1])
    for epoch in range(config.epochs):
        total = 0.0
        for k in rng.permutation(len(pairs)):
            seq, t, target, w = pairs[k]
            total += model._sgd_step(seq[:t], target, w, config.learning_rate)
        model.loss_history.append(total / len(pairs))
        log.debug("generator epoch %d loss %.5f", epoch + 1, model.loss_history[-1])
    return model


def generate(model, history, n: int) -> CandidateList:
    return model.generate(history, n)


_LIST_MARKER = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s*")


def parse_generation_response(text: str, items) -> CandidateList:
    """Keep catalog item ids from a one-id-per-line response, scored 1/rank.

    ``items`` is a :class:`Dataset` or any container of known item ids. Unknown
    ids are dropped and counted in ``CandidateList.dropped``; duplicates keep
    their first occurrence.
    """
    known = items.items if isinstance(items, Dataset) else items
    kept, seen, dropped = [], set(), 0
    for line in (text or "").splitlines():
        token = _LIST_MARKER.sub("", line).strip()
        if not token:
            continue
        token = token.split(":", 1)[0].strip().strip("`'\".,;")
        if token in seen:
            continue
        if token in known:
            seen.add(token)
            kept.append(token)
        else:
            dropped += 1
    if not kept and dropped:
        log.warning("generation response had %d lines and no known item ids", dropped)
    return CandidateList("", [(i, 1.0 / r) for r, i in enumerate(kept, start=1)], dropped)


class RemoteGenerator:
    """Generator port backed by a chat-completion endpoint."""

    def __init__(self, client, dataset: Dataset, template: PromptTemplate = DEFAULT_GENERATION,
                 window: int = HISTORY_WINDOW):
        self.client = client
        self.dataset = dataset
        self.template = template
        self.window = window
        self.hallucinated = 0

    def generate(self, history: UserHistory, n: int) -> CandidateList:
        history = truncate_history(history, self.window)
        titles = {i: self.dataset.title(i) for i in history.item_ids}
        prompt = build_generation_prompt(history, self.template, titles, self.window)
        text, _ = self.client.complete(prompt.rendered_text)
        parsed = parse_generation_response(text, self.dataset)
        self.hallucinated += parsed.dropped
        recent = set(history.item_ids)
        kept = [i for i in parsed.item_ids if i not in recent][:max(n, 0)]
        return CandidateList(history.user_id, [(i, 1.0 / r) for r, i in enumerate(kept, 1)],
                             parsed.dropped)
