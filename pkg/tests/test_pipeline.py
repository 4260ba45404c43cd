import pytest

from i2iaug.backends import build_neighbors
from i2iaug.config import VARIANTS, PipelineConfig
from i2iaug.discriminator import Verdict
from i2iaug.evaluation import evaluate
from i2iaug.exceptions import ConfigError, EndpointError
from i2iaug.pipeline import (GridCell, LocalModels, RemoteModels, filter_interactions,
                             grid_rows, preset_cells, run_experiment_grid, run_pipeline,
                             with_seeds)

FAST = {"generator.epochs": 2, "generator.dim": 8, "discriminator.epochs": 3,
        "discriminator.dim": 8, "augmentation.confidence_threshold": 0.5, "topk.K": 20}


@pytest.fixture(scope="module")
def setup(small_planted, small_split):
    ds = small_planted.dataset
    return ds, small_split, PipelineConfig().with_overrides(FAST), LocalModels(ds, small_split)


def test_presets():
    assert [c.name for c in preset_cells("ablation")] == list(VARIANTS[1:])
    assert len(preset_cells("ablation_full")) == 7
    assert [dict(c.overrides) for c in preset_cells("threshold_sweep")] == \
        [{"augmentation.confidence_threshold": t} for t in (0.0, 0.5, 0.8, 0.9, 1.0)]
    assert [c.as_dict()["augmentation.recall_number"]
            for c in preset_cells("recall_number_sweep")] == [1, 3, 5, 10, 20]
    with pytest.raises(ConfigError):
        preset_cells("everything")


def test_with_seeds():
    cells = with_seeds(preset_cells("ablation")[:2], [0, 1])
    assert [c.name for c in cells] == ["baseline/seed=0", "wo_generator/seed=0",
                                       "baseline/seed=1", "wo_generator/seed=1"]
    assert cells[3].as_dict()["discriminator.seed"] == 1


def test_baseline_is_backend_only(setup):
    ds, split, cfg, models = setup
    res = run_pipeline(ds, split, cfg.with_overrides({"pipeline.variant": "baseline"}), models)
    direct = evaluate(build_neighbors(split.train_dataset(ds).interactions(), cfg.backend),
                      split, ds, ks=cfg.eval.ks)
    assert res.report.metrics == direct.metrics and res.augmentation is None


@pytest.mark.parametrize("variant", VARIANTS)
def test_every_variant_runs(setup, variant):
    ds, split, cfg, models = setup
    res = run_pipeline(ds, split, cfg.with_overrides({"pipeline.variant": variant}), models)
    assert res.report.label == variant and res.report.counts["all"] == len(split.test)
    assert res.report.config["variant"] == variant


def test_variant_mechanics(setup):
    ds, split, cfg, models = setup
    run = lambda v, **kw: run_pipeline(  # noqa: E731
        ds, split, cfg.with_overrides({"pipeline.variant": v, **kw}), models)
    n_users = len(split.train_dataset(ds).user_ids)
    # no discriminator: every generated candidate lands in the data
    no_disc = run("wo_discriminator").augmentation
    assert no_disc["accepted"] == no_disc["candidates_generated"] - no_disc["duplicates"]
    assert no_disc["candidates_generated"] == 3 * n_users
    # at threshold 1.0 nothing passes; dropping the filter still accepts every yes
    assert run("full", **{"augmentation.confidence_threshold": 1.0}).augmentation["accepted"] == 0
    assert run("wo_threshold_filter",
               **{"augmentation.confidence_threshold": 1.0}).augmentation["accepted"] > 0
    wo_gen = run("wo_generator").augmentation
    assert wo_gen["judged"] == split.train_dataset(ds).n_interactions
    assert 0 < wo_gen["kept"] <= wo_gen["judged"]


def test_long_tail_loss_variant_trains_with_equal_weights(setup):
    ds, split, cfg, models = setup
    run_pipeline(ds, split, cfg.with_overrides({"pipeline.variant": "wo_long_tail_loss"}), models)
    alphas = {(c.alpha, c.beta) for c in models._gens}
    assert (1.0, 1.0) in alphas


class Flaky:
    def score(self, history, item_id):
        if history.user_id.endswith("1"):
            raise EndpointError("down")
        return Verdict(history.user_id, item_id, "no", 1.0)


def test_filter_keeps_failed_users_raw(setup):
    ds, split, _, _ = setup
    train = split.train_dataset(ds)
    kept, counts = filter_interactions(train, Flaky(), 0.5)
    failed = [u for u in train.user_ids if u.endswith("1")]
    assert counts["skipped_users"] == len(failed) and counts["kept"] == len(kept)
    assert {x.user_id for x in kept} == set(failed)


def test_remote_models_refuse_long_tail_ablation():
    with pytest.raises(ConfigError):
        RemoteModels(None, None).generator(PipelineConfig().generator, long_tail_loss=False)


def test_grid_isolates_failing_cells(setup):
    ds, split, cfg, models = setup
    cells = [GridCell.of("ok", pipeline__variant="baseline"),
             GridCell.of("bad", augmentation__recall_number=0),
             GridCell.of("ok2", pipeline__variant="wo_backend")]
    results = run_experiment_grid(ds, split, cfg, cells, models)
    assert [r.ok for r in results] == [True, False, True]
    assert "recall_number" in results[1].error
    rows = grid_rows(results)
    assert rows[1]["Recall@10"] == "" and rows[0]["Recall@10"] != ""
    assert {"cell", "error", "accepted", "Recall@5", "long_tail.NDCG@10"} <= set(rows[0])


def test_grid_deterministic(small_planted, small_split, setup):
    ds, split, cfg, _ = setup
    cells = preset_cells("threshold_sweep")[:2]
    a = grid_rows(run_experiment_grid(ds, split, cfg, cells, LocalModels(ds, split)))
    b = grid_rows(run_experiment_grid(ds, split, cfg, cells, LocalModels(ds, split)))
    assert a == b
