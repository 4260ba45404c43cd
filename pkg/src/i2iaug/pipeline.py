"""End-to-end runs of one pipeline variant, and the experiment grid over many.

A variant decides which stages take part:

- ``full``: generator, discriminator, threshold filter, then the backend
- ``baseline``: backend on the raw training data only
- ``wo_generator``: the discriminator filters the raw training data for the backend
- ``wo_long_tail_loss``: like ``full`` with the generator trained at alpha = beta
- ``wo_discriminator``: like ``full`` with every generated candidate accepted
- ``wo_threshold_filter``: like ``full`` with every yes-verdict accepted
- ``wo_backend``: the generator ranks items directly, no I2I backend
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

from .augmentation import AugmentationConfig, augment
from .backends import build_neighbors
from .config import VARIANTS, PipelineConfig
from .data import Dataset, Split, UserHistory
from .discriminator import AcceptAll, DiscriminatorConfig, train_discriminator
from .evaluation import SEGMENTS, EvalReport, evaluate, evaluate_generator, metric_names
from .exceptions import ConfigError, EndpointError, UnparseableVerdictError
from .generator import GeneratorConfig, train_generator

log = logging.getLogger(__name__)

ABLATION_VARIANTS = VARIANTS[1:]
THRESHOLDS = (0.0, 0.5, 0.8, 0.9, 1.0)
RECALL_NUMBERS = (1, 3, 5, 10, 20)
PRESETS = ("ablation", "ablation_full", "threshold_sweep", "recall_number_sweep")


class LocalModels:
    """Trains local generator/discriminator models on demand and caches them by config.

    ``generator_hook`` wraps every trained generator (for example in a
    noise-injecting port) and ``discriminator`` replaces the trained
    discriminator outright.
    """

    def __init__(self, dataset: Dataset, split: Split, generator_hook=None, discriminator=None):
        self.dataset = dataset
        self.split = split
        self.generator_hook = generator_hook
        self.fixed_discriminator = discriminator
        self._gens: dict[GeneratorConfig, object] = {}
        self._discs: dict[DiscriminatorConfig, object] = {}

    def generator(self, config: GeneratorConfig, long_tail_loss: bool = True):
        if not long_tail_loss:
            config = replace(config, alpha=config.beta)
        if config not in self._gens:
            model = train_generator(self.dataset, self.split, config)
            self._gens[config] = self.generator_hook(model) if self.generator_hook else model
        return self._gens[config]

    def discriminator(self, config: DiscriminatorConfig):
        if self.fixed_discriminator is not None:
            return self.fixed_discriminator
        if config not in self._discs:
            self._discs[config] = train_discriminator(self.dataset, self.split, config)
        return self._discs[config]


class RemoteModels:
    """Endpoint-backed ports; the loss weighting is fixed by the served model."""

    def __init__(self, generator, discriminator):
        self._gen = generator
        self._disc = discriminator

    def generator(self, config: GeneratorConfig, long_tail_loss: bool = True):
        if not long_tail_loss:
            raise ConfigError("pipeline.variant",
                              "wo_long_tail_loss needs a locally trained generator")
        return self._gen

    def discriminator(self, config: DiscriminatorConfig):
        return self._disc


@dataclass
class PipelineResult:
    report: EvalReport
    augmentation: dict | None = None
    neighbors: list | None = None


def filter_interactions(train: Dataset, disc, threshold: float, window: int = 10):
    """Keep raw interactions the discriminator judges yes at or above ``threshold``.

    Each interaction is judged against the user's preceding ``window``
    interactions. A user whose judge call fails keeps all interactions.
    Returns (kept interactions, counts dict).
    """
    kept, counts = [], {"judged": 0, "kept": 0, "skipped_users": 0}
    for u in train.user_ids:
        hist = train.history(u)
        xs = hist.interactions
        try:
            mine = []
            for t, x in enumerate(xs):
                prefix = UserHistory(u, xs[max(0, t - window):t], hist.static_features)
                v = disc.score(prefix, x.item_id)
                counts["judged"] += 1
                if v.decision == "yes" and v.confidence >= threshold:
                    mine.append(x)
        except (EndpointError, UnparseableVerdictError) as exc:
            log.warning("keeping raw interactions of user %s unfiltered: %s", u, exc)
            counts["skipped_users"] += 1
            mine = list(xs)
        kept.extend(mine)
        counts["kept"] += len(mine)
    return kept, counts


def run_pipeline(dataset: Dataset, split: Split, config: PipelineConfig, models=None,
                 label: str | None = None) -> PipelineResult:
    """Run ``config.variant`` end to end and evaluate it on the split's test items."""
    models = models or LocalModels(dataset, split)
    variant = config.variant
    if variant not in VARIANTS:
        raise ConfigError("pipeline.variant", f"expected one of {list(VARIANTS)}")
    label = variant if label is None else label
    echo = {"variant": variant, "config_hash": config.hash()}
    ev = config.eval
    train = split.train_dataset(dataset)

    if variant == "wo_backend":
        gen = models.generator(config.generator)
        return PipelineResult(evaluate_generator(gen, split, dataset, ev.n, ev.ks, label, echo))

    aug_info = None
    if variant == "baseline":
        stream = list(train.interactions())
    elif variant == "wo_generator":
        disc = models.discriminator(config.discriminator)
        stream, aug_info = filter_interactions(train, disc,
                                               config.augmentation.confidence_threshold,
                                               config.augmentation.history_window)
    else:
        gen = models.generator(config.generator, long_tail_loss=variant != "wo_long_tail_loss")
        disc = AcceptAll() if variant == "wo_discriminator" else \
            models.discriminator(config.discriminator)
        aug_cfg: AugmentationConfig = config.augmentation
        if variant == "wo_threshold_filter":
            aug_cfg = replace(aug_cfg, confidence_threshold=0.0)
        aug = augment(train, gen, disc, aug_cfg)
        stream = aug.merged()
        aug_info = aug.report.to_dict()

    neighbors = build_neighbors(stream, config.backend)
    report = evaluate(neighbors, split, dataset, ev.m, ev.n, ev.ks, config.index.k,
                      config.index.aggregation, label, echo)
    return PipelineResult(report, aug_info, neighbors)


# experiment grid

@dataclass(frozen=True)
class GridCell:
    name: str
    overrides: tuple = ()

    @classmethod
    def of(cls, name, **overrides):
        # keyword names use "__" for the section dot
        return cls(name, tuple((k.replace("__", "."), v) for k, v in overrides.items()))

    def as_dict(self) -> dict:
        return dict(self.overrides)


def preset_cells(name: str) -> list[GridCell]:
    """Named grids: ``ablation`` (the six reduced variants), ``ablation_full``
    (``full`` plus those six), ``threshold_sweep`` and ``recall_number_sweep``."""
    if name == "ablation":
        return [GridCell.of(v, pipeline__variant=v) for v in ABLATION_VARIANTS]
    if name == "ablation_full":
        return [GridCell.of(v, pipeline__variant=v) for v in VARIANTS]
    if name == "threshold_sweep":
        return [GridCell.of(f"threshold={t}", augmentation__confidence_threshold=t)
                for t in THRESHOLDS]
    if name == "recall_number_sweep":
        return [GridCell.of(f"recall_number={r}", augmentation__recall_number=r)
                for r in RECALL_NUMBERS]
    raise ConfigError("grid.preset", f"unknown preset {name!r}; expected one of {list(PRESETS)}")


def with_seeds(cells, seeds) -> list[GridCell]:
    """Repeat every cell once per seed, setting all model and augmentation seeds."""
    out = []
    for s in seeds:
        for c in cells:
            extra = (("generator.seed", s), ("discriminator.seed", s), ("augmentation.seed", s))
            out.append(GridCell(f"{c.name}/seed={s}", c.overrides + extra))
    return out


@dataclass
class GridResult:
    cell: GridCell
    report: EvalReport | None = None
    augmentation: dict | None = None
    error: str | None = None

    @property
    def ok(self):
        return self.error is None

    def row(self, ks=(5, 10)) -> dict:
        r = {"cell": self.cell.name, **{k: v for k, v in self.cell.overrides}}
        r["error"] = self.error or ""
        r["accepted"] = "" if not self.augmentation else self.augmentation.get(
            "accepted", self.augmentation.get("kept", ""))
        ks = self.report.ks if self.report else ks
        for seg in SEGMENTS:
            for m in metric_names(ks):
                col = m if seg == "all" else f"{seg}.{m}"
                r[col] = "" if self.report is None else repr(self.report.metrics[seg][m])
        return r


def run_experiment_grid(dataset: Dataset, split: Split, base_config: PipelineConfig, cells,
                        models=None) -> list[GridResult]:
    """One independent run per cell; a failing cell records its error and the rest proceed.

    Trained models are shared across cells with identical model configs.
    """
    models = models or LocalModels(dataset, split)
    results = []
    for cell in cells:
        try:
            cfg = base_config.with_overrides(cell.as_dict())
            res = run_pipeline(dataset, split, cfg, models, label=cell.name)
            results.append(GridResult(cell, res.report, res.augmentation))
        except Exception as exc:  # cells are isolated by contract
            log.warning("grid cell %s failed: %s", cell.name, exc)
            results.append(GridResult(cell, error=f"{type(exc).__name__}: {exc}"))
    return results


def grid_rows(results) -> list[dict]:
    ks = next((r.report.ks for r in results if r.report), (5, 10))
    return [r.row(ks) for r in results]
