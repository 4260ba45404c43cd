"""Confidence scoring of (user, item) pairs.

The local :class:`DiscriminatorModel` is a bilinear logistic scorer trained on
observed interactions (label 1) against uniformly sampled non-interacted items
(label 0). :class:`RemoteDiscriminator` asks a chat endpoint for a Yes/No
verdict instead. Both expose ``score(history, item_id) -> Verdict``.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .data import Dataset, Split, UserHistory, truncate_history
from .exceptions import EmptyDatasetError, UnknownEntityError, UnparseableVerdictError
from .prompts import DEFAULT_DISCRIMINATION, HISTORY_WINDOW, PromptTemplate, build_discrimination_prompt

log = logging.getLogger(__name__)

MODEL_FORMAT = "i2iaug.discriminator"
MODEL_VERSION = 1
YES, NO = "yes", "no"


@dataclass(frozen=True)
class DiscriminatorConfig:
    dim: int = 32
    learning_rate: float = 0.05
    epochs: int = 10
    neg_ratio: int = 1
    seed: int = 0
    init_scale: float = 0.1
    batch_size: int = 32

    def __post_init__(self):
        if self.neg_ratio < 1:
            raise ValueError("neg_ratio must be >= 1")
        if self.dim < 1 or self.batch_size < 1 or self.epochs < 0:
            raise ValueError("dim and batch_size must be >= 1, epochs >= 0")


@dataclass(frozen=True)
class LabeledPair:
    user_id: str
    item_id: str
    label: int


@dataclass(frozen=True)
class Verdict:
    user_id: str
    item_id: str
    decision: str
    confidence: float

    @property
    def is_yes(self):
        return self.decision == YES


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _sample_indices(n_items, positives: set, count, rng) -> list[int]:
    available = n_items - len(positives)
    if count > available:
        raise ValueError(f"cannot sample {count} negatives: only {available} available "
                         f"(short by {count - available})")
    if count <= 0:
        return []
    if 2 * count > available:
        pool = np.array([k for k in range(n_items) if k not in positives])
        return pool[rng.choice(len(pool), size=count, replace=False)].tolist()
    out, seen = [], set()
    while len(out) < count:
        for k in rng.integers(0, n_items, size=count - len(out)).tolist():
            if k in positives or k in seen:
                continue
            seen.add(k)
            out.append(k)
            if len(out) == count:
                break
    return out


def sample_negatives(dataset: Dataset, user, count: int, seed=None) -> list[str]:
    """Draw ``count`` distinct items the user never interacted with, uniformly.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    item_ids = dataset.item_ids
    index = {i: k for k, i in enumerate(item_ids)}
    positives = {index[i] for i in dataset.positives(user) if i in index}
    rng = np.random.default_rng(seed)
    return [item_ids[k] for k in _sample_indices(len(item_ids), positives, count, rng)]


class DiscriminatorModel:
    """``confidence(u, i) = sigmoid(<U[u], V[i]> + b)``.

    Users unseen at training time are represented by the mean embedding of
    their history items.
    """

    def __init__(self, user_ids, item_ids, user_embeddings, item_embeddings, bias=0.0,
                 config: DiscriminatorConfig | None = None):
        self.user_ids = list(user_ids)
        self.item_ids = list(item_ids)
        self.user_index = {u: k for k, u in enumerate(self.user_ids)}
        self.item_index = {i: k for k, i in enumerate(self.item_ids)}
        self.user_embeddings = np.asarray(user_embeddings, dtype=np.float64)
        self.item_embeddings = np.asarray(item_embeddings, dtype=np.float64)
        self.bias = float(bias)
        self.config = config or DiscriminatorConfig(dim=self.item_embeddings.shape[1])
        self.loss_history: list[float] = []
        self.epoch_counts: list[tuple[int, int]] = []

    @classmethod
    def initialize(cls, user_ids, item_ids, config: DiscriminatorConfig):
        rng = np.random.default_rng(config.seed)
        s = config.init_scale
        users = rng.normal(0.0, s, (len(user_ids), config.dim))
        items = rng.normal(0.0, s, (len(item_ids), config.dim))
        return cls(sorted(user_ids), sorted(item_ids), users, items, 0.0, config)

    def _item(self, item_id) -> int:
        try:
            return self.item_index[item_id]
        except KeyError:
            raise UnknownEntityError(f"unknown item {item_id!r}") from None

    def _user(self, user_id) -> int:
        try:
            return self.user_index[user_id]
        except KeyError:
            raise UnknownEntityError(f"unknown user {user_id!r}") from None

    def user_vector(self, history) -> np.ndarray:
        if isinstance(history, UserHistory) and history.user_id in self.user_index:
            return self.user_embeddings[self.user_index[history.user_id]]
        if isinstance(history, str):
            return self.user_embeddings[self._user(history)]
        ids = history.item_ids if isinstance(history, UserHistory) else list(history)
        idx = [self.item_index[i] for i in ids if i in self.item_index]
        if not idx:
            return np.zeros(self.item_embeddings.shape[1])
        return self.item_embeddings[idx].mean(axis=0)

    def raw_score(self, history, item_id) -> float:
        return float(self.user_vector(history) @ self.item_embeddings[self._item(item_id)]
                     + self.bias)

    def score(self, history, item_id) -> Verdict:
        return score_pair(self, history, item_id)

    def loss_and_grad(self, u, i, label):
        """BCE for user row ``u`` and item row ``i``; grads w.r.t. (U[u], V[i], b)."""
        pu, qi = self.user_embeddings[u], self.item_embeddings[i]
        s = float(pu @ qi + self.bias)
        loss = float(np.logaddexp(0.0, s) - label * s)
        g = float(_sigmoid(s)) - label
        return loss, g * qi, g * pu, g

    def to_dict(self):
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "config": asdict(self.config),
            "user_index": self.user_ids,
            "item_index": self.item_ids,
            "user_embeddings": self.user_embeddings.tolist(),
            "item_embeddings": self.item_embeddings.tolist(),
            "bias": self.bias,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != MODEL_FORMAT or d.get("version") != MODEL_VERSION:
            raise ValueError(f"not a discriminator model v{MODEL_VERSION}: "
                             f"{d.get('format')} v{d.get('version')}")
        cfg = DiscriminatorConfig(**d["config"])
        users = np.array(d["user_embeddings"], dtype=np.float64).reshape(len(d["user_index"]),
                                                                         cfg.dim)
        items = np.array(d["item_embeddings"], dtype=np.float64).reshape(len(d["item_index"]),
                                                                         cfg.dim)
        return cls(d["user_index"], d["item_index"], users, items, d["bias"], cfg)

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def discriminator_loss(model: DiscriminatorModel, pair: LabeledPair) -> float:
    u = model._user(pair.user_id)
    i = model._item(pair.item_id)
    return model.loss_and_grad(u, i, pair.label)[0]


def score_pair(model: DiscriminatorModel, history, item_id) -> Verdict:
    conf = float(_sigmoid(model.raw_score(history, item_id)))
    user_id = history.user_id if isinstance(history, UserHistory) else ""
    return Verdict(user_id, item_id, YES if conf >= 0.5 else NO, conf)


def _batch_loss(model, users, items, labels):
    s = np.einsum("ij,ij->i", model.user_embeddings[users], model.item_embeddings[items])
    s += model.bias
    return np.logaddexp(0.0, s) - labels * s


def _sgd_batch(model, users, items, labels, lr) -> float:
    pu = model.user_embeddings[users]
    qi = model.item_embeddings[items]
    s = np.einsum("ij,ij->i", pu, qi) + model.bias
    loss = np.logaddexp(0.0, s) - labels * s
    g = _sigmoid(s) - labels
    np.subtract.at(model.user_embeddings, users, lr * g[:, None] * qi)
    np.subtract.at(model.item_embeddings, items, lr * g[:, None] * pu)
    model.bias -= lr * float(g.sum())
    return float(loss.sum())


def train_discriminator(dataset: Dataset, split: Split,
                        config: DiscriminatorConfig | None = None) -> DiscriminatorModel:
    """Fit on train-split positives plus fresh uniform negatives every epoch.

    ``model.loss_history[0]`` is the mean loss of the initialization on the
    first epoch's pairs; later entries are per-epoch running means.
    ``model.epoch_counts`` records (#positive, #negative) terms per epoch.
    """
    config = config or DiscriminatorConfig()
    train = split.train_dataset(dataset)
    if train.n_interactions == 0:
        raise EmptyDatasetError("train split is empty")
    model = DiscriminatorModel.initialize(train.user_ids, dataset.item_ids, config)
    n_items = len(model.item_ids)
    pos_u, pos_i, per_user = [], [], []
    for u in model.user_ids:
        items = sorted({model.item_index[i] for i in train.history(u).item_ids})
        ui = model.user_index[u]
        pos_u.extend([ui] * len(items))
        pos_i.extend(items)
        per_user.append((ui, set(items)))
    pos_u = np.array(pos_u, dtype=np.int64)
    pos_i = np.array(pos_i, dtype=np.int64)
    rng = np.random.default_rng([config.seed, 2])

    def epoch_pairs():
        neg_u, neg_i = [], []
        for ui, positives in per_user:
            count = min(config.neg_ratio * len(positives), n_items - len(positives))
            drawn = _sample_indices(n_items, positives, count, rng)
            neg_u.extend([ui] * len(drawn))
            neg_i.extend(drawn)
        users = np.concatenate([pos_u, np.array(neg_u, dtype=np.int64)])
        items = np.concatenate([pos_i, np.array(neg_i, dtype=np.int64)])
        labels = np.concatenate([np.ones(len(pos_u)), np.zeros(len(neg_u))])
        return users, items, labels

    users, items, labels = epoch_pairs()
    model.loss_history = [float(_batch_loss(model, users, items, labels).mean())]
    for epoch in range(config.epochs):
        if epoch > 0:
            users, items, labels = epoch_pairs()
        n_pos = int(labels.sum())
        model.epoch_counts.append((n_pos, len(labels) - n_pos))
        order = rng.permutation(len(labels))
        total = 0.0
        bs = config.batch_size
        for start in range(0, len(order), bs):
            b = order[start:start + bs]
            total += _sgd_batch(model, users[b], items[b], labels[b], config.learning_rate)
        model.loss_history.append(total / len(labels))
        log.debug("discriminator epoch %d loss %.5f", epoch + 1, model.loss_history[-1])
    return model


_VERDICT = re.compile(r"^\W*(yes|no)\b", re.I)


def parse_verdict(text: str, token_scores=None) -> Verdict:
    """Read a leading Yes/No token.

    Confidence is the probability the endpoint reported for that token; a bare
    verdict without token probabilities counts as fully confident.
    """
    m = _VERDICT.match(text or "")
    if not m:
        raise UnparseableVerdictError(f"no Yes/No verdict in {text[:40]!r}")
    decision = m.group(1).lower()
    confidence = 1.0
    if token_scores:
        probs = {}
        for tok, p in token_scores.items():
            key = tok.strip().lower()
            if key in (YES, NO):
                probs[key] = probs.get(key, 0.0) + float(p)
        if decision in probs:
            confidence = probs[decision]
        elif probs:
            other = NO if decision == YES else YES
            confidence = 1.0 - probs[other]
    return Verdict("", "", decision, min(max(confidence, 0.0), 1.0))


class RemoteDiscriminator:
    """Discriminator port backed by a chat-completion endpoint."""

    def __init__(self, client, dataset: Dataset,
                 template: PromptTemplate = DEFAULT_DISCRIMINATION, window: int = HISTORY_WINDOW):
        self.client = client
        self.dataset = dataset
        self.template = template
        self.window = window

    def score(self, history: UserHistory, item_id: str) -> Verdict:
        if item_id not in self.dataset.items:
            raise UnknownEntityError(f"unknown item {item_id!r}")
        history = truncate_history(history, self.window)
        titles = {i: self.dataset.title(i) for i in [*history.item_ids, item_id]}
        prompt = build_discrimination_prompt(history, item_id, self.template, titles,
                                             self.window)
        text, token_scores = self.client.complete(prompt)
        v = parse_verdict(text, token_scores)
        return Verdict(history.user_id, item_id, v.decision, v.confidence)


class AcceptAll:
    """Discriminator stand-in that says yes with full confidence to everything."""

    def score(self, history, item_id) -> Verdict:
        user_id = history.user_id if isinstance(history, UserHistory) else ""
        return Verdict(user_id, item_id, YES, 1.0)
