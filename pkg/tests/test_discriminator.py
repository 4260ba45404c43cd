import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from i2iaug.data import UserHistory, chronological_split
from i2iaug.discriminator import (AcceptAll, DiscriminatorConfig, DiscriminatorModel, LabeledPair,
                                  discriminator_loss, parse_verdict, sample_negatives,
                                  score_pair, train_discriminator)
from i2iaug.exceptions import EmptyDatasetError, UnknownEntityError, UnparseableVerdictError

from conftest import make_dataset
from oracles import finite_diff, rel_err


@pytest.fixture
def five_items():
    return make_dataset([("u", "a", 1), ("u", "b", 2), ("v", "c", 1), ("v", "d", 2),
                         ("v", "e", 3)])


def test_negatives_forced_set(five_items):
    neg = sample_negatives(five_items, "u", 3, seed=0)
    assert sorted(neg) == ["c", "d", "e"]


def test_negatives_shortfall_named(five_items):
    with pytest.raises(ValueError, match="short by 1"):
        sample_negatives(five_items, "u", 4, seed=0)


def test_negatives_deterministic(five_items):
    assert sample_negatives(five_items, "v", 2, seed=7) == sample_negatives(five_items, "v", 2,
                                                                            seed=7)


@given(st.integers(0, 10_000), st.integers(1, 8))
def test_negatives_never_positive_or_duplicate(seed, count):
    rows = [("u", f"i{k}", k) for k in (0, 3, 5)] + [("w", f"i{k}", k) for k in range(11)]
    ds = make_dataset(rows)
    neg = sample_negatives(ds, "u", count, seed=seed)
    assert len(neg) == len(set(neg)) == count
    assert not set(neg) & ds.positives("u")


def test_negatives_uniform_chi_square():
    # 10-item catalog, 2 positives: each of the 8 others should be equally likely
    rows = [("u", "i0", 0), ("u", "i1", 1)] + [("w", f"i{k}", k) for k in range(10)]
    ds = make_dataset(rows)
    draws = [sample_negatives(ds, "u", 1, seed=s)[0] for s in range(8000)]
    counts = np.array([draws.count(f"i{k}") for k in range(2, 10)])
    assert stats.chisquare(counts).pvalue > 1e-3
    # multi-draw path (rejection sampling) as well
    pairs = [x for s in range(3000) for x in sample_negatives(ds, "u", 2, seed=s)]
    counts = np.array([pairs.count(f"i{k}") for k in range(2, 10)])
    assert stats.chisquare(counts).pvalue > 1e-3


def zero_model(users=("u",), items=("a", "b")):
    return DiscriminatorModel(list(users), list(items), np.zeros((len(users), 3)),
                              np.zeros((len(items), 3)), 0.0)


@pytest.mark.parametrize("label", [0, 1])
def test_zero_model_loss_ln2(label):
    assert discriminator_loss(zero_model(), LabeledPair("u", "a", label)) == \
        pytest.approx(math.log(2), abs=1e-15)


def test_confident_positive_has_no_loss():
    m = zero_model()
    m.bias = 50.0
    assert discriminator_loss(m, LabeledPair("u", "a", 1)) < 1e-20


def test_loss_matches_hand_bce():
    rng = np.random.default_rng(3)
    for _ in range(20):
        m = DiscriminatorModel(["u", "v"], ["a", "b", "c"], rng.normal(size=(2, 4)),
                               rng.normal(size=(3, 4)), float(rng.normal()))
        u, i, y = int(rng.integers(2)), int(rng.integers(3)), int(rng.integers(2))
        s = float(np.dot(m.user_embeddings[u], m.item_embeddings[i]) + m.bias)
        p = 1.0 / (1.0 + math.exp(-s))
        hand = -(y * math.log(p) + (1 - y) * math.log(1 - p))
        got = discriminator_loss(m, LabeledPair(m.user_ids[u], m.item_ids[i], y))
        assert got == pytest.approx(hand, abs=1e-12)


def test_unknown_entities():
    m = zero_model()
    with pytest.raises(UnknownEntityError):
        discriminator_loss(m, LabeledPair("zz", "a", 1))
    with pytest.raises(UnknownEntityError):
        score_pair(m, UserHistory.from_interactions("u", []), "zz")


@pytest.mark.parametrize("seed", range(10))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    m = DiscriminatorModel(["u", "v"], ["a", "b", "c"], rng.normal(size=(2, 3)),
                           rng.normal(size=(3, 3)), float(rng.normal()))
    u, i, y = int(rng.integers(2)), int(rng.integers(3)), int(rng.integers(2))
    _, gu, gi, gb = m.loss_and_grad(u, i, y)
    f = lambda: m.loss_and_grad(u, i, y)[0]  # noqa: E731
    assert rel_err(gu, finite_diff(f, m.user_embeddings)[u]) <= 1e-4
    assert rel_err(gi, finite_diff(f, m.item_embeddings)[i]) <= 1e-4
    bias = np.array([m.bias])

    def fb():
        m.bias = float(bias[0])
        return f()
    assert rel_err([gb], finite_diff(fb, bias)) <= 1e-4


def test_zero_model_verdict_boundary():
    v = score_pair(zero_model(), UserHistory.from_interactions("u", []), "a")
    assert v.confidence == 0.5 and v.decision == "yes"


def test_scores_pure_and_monotone():
    rng = np.random.default_rng(1)
    items = [f"i{k}" for k in range(12)]
    m = DiscriminatorModel(["u"], items, rng.normal(size=(1, 4)), rng.normal(size=(12, 4)), 0.2)
    h = UserHistory.from_interactions("u", [])
    verdicts = [m.score(h, i) for i in items]
    assert verdicts == [m.score(h, i) for i in items]
    by_conf = sorted(items, key=lambda i: (m.score(h, i).confidence, i))
    by_raw = sorted(items, key=lambda i: (m.raw_score(h, i), i))
    assert by_conf == by_raw
    for v in verdicts:
        assert 0.0 <= v.confidence <= 1.0
        assert (v.decision == "yes") == (v.confidence >= 0.5)


def test_cold_user_uses_history_items():
    rng = np.random.default_rng(2)
    m = DiscriminatorModel(["u"], ["a", "b"], rng.normal(size=(1, 2)), rng.normal(size=(2, 2)))
    from i2iaug.data import Interaction
    cold = UserHistory.from_interactions("new", [Interaction("new", "a", 1, "click")])
    assert m.raw_score(cold, "b") == pytest.approx(float(m.item_embeddings[0] @
                                                         m.item_embeddings[1]))


@pytest.fixture(scope="module")
def trained(small_planted, small_split):
    cfg = DiscriminatorConfig(dim=16, epochs=15, learning_rate=0.1, seed=2)
    return train_discriminator(small_planted.dataset, small_split, cfg)


def test_training_counts_and_loss(trained):
    assert trained.loss_history[-1] <= trained.loss_history[0]
    assert len(trained.epoch_counts) == 15
    for n_pos, n_neg in trained.epoch_counts:
        assert n_pos == n_neg


def test_training_deterministic(small_planted, small_split):
    cfg = DiscriminatorConfig(dim=4, epochs=2, seed=6)
    a = train_discriminator(small_planted.dataset, small_split, cfg)
    b = train_discriminator(small_planted.dataset, small_split, cfg)
    assert np.array_equal(a.user_embeddings, b.user_embeddings)
    assert np.array_equal(a.item_embeddings, b.item_embeddings) and a.bias == b.bias


def test_zero_epochs_is_initialization(small_planted, small_split):
    cfg = DiscriminatorConfig(dim=4, epochs=0, seed=6)
    m = train_discriminator(small_planted.dataset, small_split, cfg)
    init = DiscriminatorModel.initialize(m.user_ids, m.item_ids, cfg)
    assert np.array_equal(m.user_embeddings, init.user_embeddings)
    assert np.array_equal(m.item_embeddings, init.item_embeddings)


def test_held_out_positives_beat_negatives(trained, small_planted, small_split):
    ds = small_planted.dataset
    pos, cross, neg = [], [], []
    rng = np.random.default_rng(0)
    for u, x in small_split.test.items():
        h = UserHistory(u, small_split.train[u])
        pos.append(trained.score(h, x.item_id).confidence)
        other = [i for i in ds.item_ids if not small_planted.same_cluster(u, i)]
        cross.append(trained.score(h, other[int(rng.integers(len(other)))]).confidence)
        neg.append(trained.score(h, sample_negatives(ds, u, 1, seed=rng)[0]).confidence)
    assert np.mean(pos) > np.mean(neg)
    assert np.mean(pos) > np.mean(cross)


def test_empty_train_split():
    ds = make_dataset([("u", "a", 1)])
    with pytest.raises(EmptyDatasetError):
        train_discriminator(ds, chronological_split(ds).__class__({}, {}, {}, 0))


def test_round_trip(tmp_path, trained):
    trained.save(tmp_path / "d.json")
    back = DiscriminatorModel.load(tmp_path / "d.json")
    assert np.array_equal(back.user_embeddings, trained.user_embeddings)
    assert np.array_equal(back.item_embeddings, trained.item_embeddings)
    assert back.bias == trained.bias and back.config == trained.config


def test_parse_verdict_examples():
    v = parse_verdict("Yes", {"Yes": 0.93})
    assert (v.decision, v.confidence) == ("yes", 0.93)
    v = parse_verdict("no, unlikely")
    assert (v.decision, v.confidence) == ("no", 1.0)
    with pytest.raises(UnparseableVerdictError):
        parse_verdict("maybe")
    assert parse_verdict("**YES** it fits").decision == "yes"
    assert parse_verdict("Yes", {" yes": 0.6, "No": 0.4}).confidence == pytest.approx(0.6)


def test_accept_all():
    v = AcceptAll().score(UserHistory.from_interactions("u", []), "a")
    assert (v.decision, v.confidence) == ("yes", 1.0)
