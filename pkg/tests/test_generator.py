import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from i2iaug.data import UserHistory, chronological_split, label_long_tail
from i2iaug.exceptions import EmptyDatasetError, UnknownEntityError
from i2iaug.generator import (GeneratorConfig, GeneratorModel, parse_generation_response,
                              train_generator, training_pairs, weighted_loss)
from i2iaug.synthetic import planted_clusters

from conftest import make_dataset
from oracles import finite_diff, rel_err


def two_item_model(bias_other=0.0, alpha=4.0, beta=1.0):
    cfg = GeneratorConfig(dim=2, alpha=alpha, beta=beta)
    return GeneratorModel(["a", "b"], np.zeros((2, 2)), np.array([0.0, bias_other]), cfg)


def test_uniform_softmax_loss_is_ln2():
    m = two_item_model()
    assert weighted_loss(m, ["a"], "a", False) == pytest.approx(math.log(2), abs=1e-15)
    assert weighted_loss(m, ["a"], "a", True) == pytest.approx(4 * math.log(2), abs=1e-15)


def test_long_tail_weight_example():
    # choose the other item's bias so the plain cross-entropy is 0.5
    m = two_item_model(bias_other=math.log(math.exp(0.5) - 1.0))
    ce = weighted_loss(m, ["b"], "a", False)
    assert ce == pytest.approx(0.5, abs=1e-12)
    assert weighted_loss(m, ["b"], "a", True) == pytest.approx(2.0, abs=1e-12)


def random_model(rng, n_items=None, dim=None, alpha=4.0, beta=1.0):
    n = n_items or int(rng.integers(2, 6))
    d = dim or int(rng.integers(1, 5))
    cfg = GeneratorConfig(dim=d, alpha=alpha, beta=beta)
    ids = [f"i{k}" for k in range(n)]
    return GeneratorModel(ids, rng.normal(0, 0.5, (n, d)), rng.normal(0, 0.5, n), cfg)


def test_unit_weights_equal_cross_entropy():
    rng = np.random.default_rng(0)
    m = random_model(rng, 5, 3, alpha=1.0, beta=1.0)
    for t in m.item_ids:
        z = m.logits(m.indices(["i0", "i1"]))
        ce = float(np.log(np.exp(z).sum()) - z[m.index[t]])
        assert weighted_loss(m, ["i0", "i1"], t, True) == pytest.approx(ce, rel=1e-12)
        assert weighted_loss(m, ["i0", "i1"], t, False) == pytest.approx(ce, rel=1e-12)


def test_unknown_target():
    with pytest.raises(UnknownEntityError):
        weighted_loss(two_item_model(), ["a"], "zz", False)


@pytest.mark.parametrize("seed", range(10))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng)
    n = len(m.item_ids)
    hist_idx = rng.choice(n, size=int(rng.integers(1, n + 1)), replace=True)
    target = int(rng.integers(n))
    w = float(rng.choice([1.0, 4.0]))
    _, g_emb, g_bias = m.loss_and_grad(hist_idx, target, w)
    f = lambda: m.loss_and_grad(hist_idx, target, w)[0]  # noqa: E731
    assert rel_err(g_emb, finite_diff(f, m.embeddings)) <= 1e-4
    assert rel_err(g_bias, finite_diff(f, m.bias)) <= 1e-4


@given(st.floats(0.01, 100.0), st.integers(0, 10_000))
def test_loss_scales_linearly_with_weights(c, seed):
    rng = np.random.default_rng(seed)
    base = random_model(rng, 4, 2)
    scaled = GeneratorModel(base.item_ids, base.embeddings, base.bias,
                            GeneratorConfig(dim=2, alpha=4.0 * c, beta=c))
    for lt in (True, False):
        a = weighted_loss(base, ["i1", "i2"], "i3", lt)
        b = weighted_loss(scaled, ["i1", "i2"], "i3", lt)
        assert b == pytest.approx(c * a, rel=1e-12)


@pytest.fixture(scope="module")
def trained(small_planted, small_split):
    cfg = GeneratorConfig(dim=16, epochs=4, learning_rate=0.1, seed=5)
    return train_generator(small_planted.dataset, small_split, cfg)


def test_training_reduces_loss_and_counts_pairs(trained, small_planted, small_split):
    assert trained.loss_history[-1] <= trained.loss_history[0]
    pairs = training_pairs(trained, small_planted.dataset, small_split)
    expected = sum(max(len(v) - 1, 0) for v in small_split.train.values())
    assert trained.samples_per_epoch == len(pairs) == expected
    assert np.isfinite(trained.embeddings).all()


def test_initial_loss_is_sum_of_weighted_losses(small_planted, small_split):
    ds = small_planted.dataset
    cfg = GeneratorConfig(dim=8, epochs=0, seed=1)
    m = train_generator(ds, small_split, cfg)
    total = 0.0
    n = 0
    for u in sorted(small_split.train):
        ids = [x.item_id for x in small_split.train[u]]
        for t in range(1, len(ids)):
            total += weighted_loss(m, ids[:t], ids[t], ds.items[ids[t]].long_tail)
            n += 1
    assert m.loss_history[0] == pytest.approx(total / n, rel=1e-12)


def test_training_is_bit_reproducible(small_planted, small_split):
    cfg = GeneratorConfig(dim=8, epochs=2, seed=9)
    a = train_generator(small_planted.dataset, small_split, cfg)
    b = train_generator(small_planted.dataset, small_split, cfg)
    assert np.array_equal(a.embeddings, b.embeddings) and np.array_equal(a.bias, b.bias)
    assert a.loss_history == b.loss_history


def test_zero_epochs_is_initialization(small_planted, small_split):
    cfg = GeneratorConfig(dim=8, epochs=0, seed=4)
    m = train_generator(small_planted.dataset, small_split, cfg)
    init = GeneratorModel.initialize(small_planted.dataset.item_ids, cfg)
    assert np.array_equal(m.embeddings, init.embeddings)
    assert np.all(np.abs(init.embeddings) <= cfg.init_scale)


def test_single_pair_is_learned():
    ds = label_long_tail(make_dataset([("u", "a", 1), ("u", "b", 2)]), 0.5)
    m = train_generator(ds, chronological_split(ds), GeneratorConfig(dim=4, epochs=50))
    p = m.probabilities(m.indices(["a"]))
    assert p[m.index["b"]] > 0.5


def test_empty_train_split_errors():
    ds = make_dataset([("u", "a", 1)])
    with pytest.raises(EmptyDatasetError):
        train_generator(ds, chronological_split(ds), GeneratorConfig(epochs=1))


def test_planted_held_out_beats_cross_cluster():
    planted = planted_clusters(n_users=400, n_items=40, n_clusters=2, min_history=5,
                               max_history=8, seed=11)
    ds = planted.dataset
    split = chronological_split(ds)
    m = train_generator(ds, split, GeneratorConfig(dim=8, epochs=3, learning_rate=0.1))
    rng = np.random.default_rng(0)
    held, cross = [], []
    for u, x in split.test.items():
        p = m.probabilities(m.indices([y.item_id for y in split.train[u]]))
        held.append(p[m.index[x.item_id]])
        other = [i for i in ds.item_ids if not planted.same_cluster(u, i)]
        cross.append(p[m.index[other[int(rng.integers(len(other)))]]])
    assert np.mean(held) > np.mean(cross)


def test_generate_excludes_history_and_orders():
    m = GeneratorModel(["a", "b", "c"], np.zeros((3, 2)), np.array([0.0, 0.1, 0.3]))
    out = m.generate(["a"], 2)
    assert out.item_ids == ["c", "b"]
    assert [s for _, s in out.candidates] == sorted((s for _, s in out.candidates), reverse=True)
    assert m.generate(["a"], 0).candidates == []
    assert m.generate(["a"], 10).item_ids == ["c", "b"]
    h = UserHistory.from_interactions("u", [])
    assert m.generate(h, 2).item_ids == ["c", "b"]


def test_generate_ties_by_item_id():
    m = GeneratorModel(["d", "e", "f", "g"], np.zeros((4, 2)), np.zeros(4))
    assert m.generate(["e"], 3).item_ids == ["d", "f", "g"]


def test_generate_uses_last_ten(trained, small_planted):
    ds = small_planted.dataset
    long_user = max(ds.user_ids, key=lambda u: len(ds.history(u)))
    h = ds.history(long_user)
    out = trained.generate(h, 20)
    recent = set(h.item_ids[-10:])
    assert not recent & set(out.item_ids)
    assert len(out.item_ids) == len(set(out.item_ids))


def test_planted_candidates_stay_in_cluster():
    planted = planted_clusters(n_users=400, n_items=40, n_clusters=2, min_history=5,
                               max_history=8, seed=11)
    ds = planted.dataset
    split = chronological_split(ds)
    m = train_generator(ds, split, GeneratorConfig(dim=8, epochs=3, learning_rate=0.1))
    u = next(u for u in sorted(split.train) if not any(
        (u, x.item_id) in planted.noise_pairs for x in split.train[u]))
    cands = m.generate(split.train_dataset(ds).history(u), 5)
    assert len(cands) == 5
    assert all(planted.same_cluster(u, i) for i in cands.item_ids)


def test_model_round_trip(tmp_path, trained):
    p = tmp_path / "gen.json"
    trained.save(p)
    back = GeneratorModel.load(p)
    assert np.array_equal(back.embeddings, trained.embeddings)
    assert np.array_equal(back.bias, trained.bias)
    assert back.config == trained.config and back.item_ids == trained.item_ids


def test_parse_generation_response():
    items = {"item_17", "item_3"}
    out = parse_generation_response("item_17\nitem_99", items)
    assert out.item_ids == ["item_17"] and out.dropped == 1
    out = parse_generation_response("1. item_3: Lip balm\n- item_3\nitem_17", items)
    assert out.item_ids == ["item_3", "item_17"]
    assert [s for _, s in out.candidates] == [1.0, 0.5]
    empty = parse_generation_response("", items)
    assert empty.candidates == [] and empty.dropped == 0
