"""
Confidence threshold and recall-number sweeps
=============================================

Two knobs govern how much synthetic data reaches the backend: how many
candidates the generator proposes per user, and how confident the judge must
be. To see their effect in isolation, the generator is wrapped so that
later-ranked candidates are increasingly replaced by random items, and the
judge is an oracle that knows the planted clusters.
"""

from i2iaug.config import PipelineConfig
from i2iaug.data import chronological_split
from i2iaug.evaluation import format_table
from i2iaug.pipeline import LocalModels, preset_cells, run_experiment_grid
from i2iaug.synthetic import NoisyGenerator, OracleDiscriminator, planted_clusters

planted = planted_clusters(spread=1.5, min_history=3, max_history=5, zipf=0.5,
                           tail_weight=0.5, noise=0.2, seed=0)
ds = planted.dataset
split = chronological_split(ds)
cfg = PipelineConfig().with_overrides({"generator.epochs": 6, "generator.learning_rate": 0.1})

####################################################################
# Models
# ------
# The oracle judge reports confidence 1.0 for within-cluster pairs and 0.2
# for cross-cluster ones, answering yes to both.

models = LocalModels(ds, split, discriminator=OracleDiscriminator(planted),
                     generator_hook=lambda g: NoisyGenerator(g, ds.item_ids, seed=0))

####################################################################
# Threshold sweep
# ---------------
# At 0.0 every noisy candidate is merged; from 0.5 up only planted-plausible
# ones survive.

results = run_experiment_grid(ds, split, cfg, preset_cells("threshold_sweep"), models)
print(format_table([r.report for r in results], segments=("all", "long_tail")))

####################################################################
# Recall-number sweep
# -------------------
# More candidates add more evidence until the noisy tail of each list
# starts to dominate what passes the filter.

strict = cfg.with_overrides({"augmentation.confidence_threshold": 0.9})
results = run_experiment_grid(ds, split, strict, preset_cells("recall_number_sweep"), models)
for r in results:
    print(f"{r.cell.name:18s} accepted {r.augmentation['accepted']:6d}  "
          f"Recall@10 {r.report.value('Recall@10'):.4f}")
