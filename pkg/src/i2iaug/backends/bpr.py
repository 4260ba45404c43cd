"""Bayesian personalized ranking matrix factorization."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..exceptions import EmptyDatasetError, UnknownEntityError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BprConfig:
    factors: int = 100
    learning_rate: float = 0.05
    regularization: float = 0.01
    epochs: int = 20
    neg_per_pos: int = 1
    batch_size: int = 64
    seed: int = 0
    init_scale: float = 0.1

    def __post_init__(self):
        if self.factors < 1 or self.neg_per_pos < 1 or self.batch_size < 1:
            raise ValueError("factors, neg_per_pos and batch_size must be >= 1")
        if self.epochs < 0 or self.regularization < 0:
            raise ValueError("epochs and regularization must be non-negative")


class BprModel:
    def __init__(self, user_ids, item_ids, user_factors, item_factors,
                 config: BprConfig | None = None):
        self.user_ids = list(user_ids)
        self.item_ids = list(item_ids)
        self.user_index = {u: k for k, u in enumerate(self.user_ids)}
        self.item_index = {i: k for k, i in enumerate(self.item_ids)}
        self.user_factors = np.asarray(user_factors, dtype=np.float64)
        self.item_factors = np.asarray(item_factors, dtype=np.float64)
        self.config = config or BprConfig(factors=self.item_factors.shape[1])
        self.loss_history: list[float] = []

    def _u(self, user_id):
        try:
            return self.user_index[user_id]
        except KeyError:
            raise UnknownEntityError(f"unknown user {user_id!r}") from None

    def _i(self, item_id):
        try:
            return self.item_index[item_id]
        except KeyError:
            raise UnknownEntityError(f"unknown item {item_id!r}") from None

    def score(self, user_id, item_id) -> float:
        return float(self.user_factors[self._u(user_id)] @ self.item_factors[self._i(item_id)])

    def loss_and_grad(self, u, i, j):
        """Triple loss ``-ln sigmoid(x_ui - x_uj) + reg/2 * (|p_u|^2 + |q_i|^2 + |q_j|^2)``.

        Returns the loss and gradients with respect to (p_u, q_i, q_j).
        """
        reg = self.config.regularization
        p, qi, qj = self.user_factors[u], self.item_factors[i], self.item_factors[j]
        d = float(p @ (qi - qj))
        loss = float(np.logaddexp(0.0, -d)) + 0.5 * reg * float(p @ p + qi @ qi + qj @ qj)
        g = -0.5 * (1.0 - np.tanh(0.5 * d))  # -sigmoid(-d)
        return loss, g * (qi - qj) + reg * p, g * p + reg * qi, -g * p + reg * qj


def triple_loss(model: BprModel, user_id, pos_item, neg_item) -> float:
    return model.loss_and_grad(model._u(user_id), model._i(pos_item), model._i(neg_item))[0]


def _batch(model, u, i, j, lr=None):
    reg = model.config.regularization
    p = model.user_factors[u]
    qi = model.item_factors[i]
    qj = model.item_factors[j]
    d = np.einsum("ij,ij->i", p, qi - qj)
    loss = np.logaddexp(0.0, -d) + 0.5 * reg * (
        np.einsum("ij,ij->i", p, p) + np.einsum("ij,ij->i", qi, qi)
        + np.einsum("ij,ij->i", qj, qj))
    if lr is not None:
        g = (-0.5 * (1.0 - np.tanh(0.5 * d)))[:, None]
        np.subtract.at(model.user_factors, u, lr * (g * (qi - qj) + reg * p))
        np.subtract.at(model.item_factors, i, lr * (g * p + reg * qi))
        np.subtract.at(model.item_factors, j, lr * (-g * p + reg * qj))
    return loss


def _sample_negatives(pos_u, n_items, pos_codes, rng):
    """One uniform non-clicked item per positive, by rejection."""
    neg = rng.integers(0, n_items, size=len(pos_u))
    bad = np.isin(pos_u * n_items + neg, pos_codes)
    while bad.any():
        neg[bad] = rng.integers(0, n_items, size=int(bad.sum()))
        bad = np.isin(pos_u * n_items + neg, pos_codes)
    return neg


def train_bpr(stream, config: BprConfig | None = None) -> BprModel:
    """Minibatch SGD over sampled (user, clicked, non-clicked) triples.

    Users who clicked every item have no negatives and are skipped.
    ``loss_history[0]`` is the initial mean triple loss; later entries are
    per-epoch running means.
    """
    config = config or BprConfig()
    pairs = {(x.user_id, x.item_id) for x in stream}
    if not pairs:
        raise EmptyDatasetError("BPR needs at least one positive interaction")
    user_ids = sorted({u for u, _ in pairs})
    item_ids = sorted({i for _, i in pairs})
    if len(item_ids) < 2:
        raise ValueError("BPR needs a catalog of at least two items")
    rng = np.random.default_rng(config.seed)
    s = config.init_scale
    model = BprModel(user_ids, item_ids,
                     rng.normal(0.0, s, (len(user_ids), config.factors)),
                     rng.normal(0.0, s, (len(item_ids), config.factors)), config)
    n_items = len(item_ids)
    codes = np.array(sorted(model.user_index[u] * n_items + model.item_index[i]
                            for u, i in pairs), dtype=np.int64)
    pos_u, pos_i = np.divmod(codes, n_items)
    per_user = np.bincount(pos_u, minlength=len(user_ids))
    usable = per_user[pos_u] < n_items
    pos_u, pos_i = pos_u[usable], pos_i[usable]
    pos_u = np.repeat(pos_u, config.neg_per_pos)
    pos_i = np.repeat(pos_i, config.neg_per_pos)

    neg = _sample_negatives(pos_u, n_items, codes, rng)
    model.loss_history = [float(_batch(model, pos_u, pos_i, neg).mean())]
    bs = config.batch_size
    for epoch in range(config.epochs):
        if epoch > 0:
            neg = _sample_negatives(pos_u, n_items, codes, rng)
        order = rng.permutation(len(pos_u))
        total = 0.0
        for start in range(0, len(order), bs):
            b = order[start:start + bs]
            total += float(_batch(model, pos_u[b], pos_i[b], neg[b], config.learning_rate).sum())
        model.loss_history.append(total / max(len(pos_u), 1))
        log.debug("bpr epoch %d loss %.5f", epoch + 1, model.loss_history[-1])
    return model
