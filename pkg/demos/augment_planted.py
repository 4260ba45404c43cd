"""
Augmenting a sparse log with generated and judged interactions
==============================================================

Planted-cluster data gives a recommender log whose ground truth is known:
every user shops inside one cluster, and the least popular fifth of each
cluster is long-tail by construction. We train the local generator and
discriminator, augment the training split, and compare Swing neighbor lists
built with and without the synthetic clicks.
"""

from dataclasses import replace

from i2iaug.augmentation import AugmentationConfig, augment
from i2iaug.backends import BackendConfig, build_neighbors
from i2iaug.data import chronological_split
from i2iaug.discriminator import DiscriminatorConfig, train_discriminator
from i2iaug.evaluation import evaluate, format_table
from i2iaug.generator import GeneratorConfig, train_generator
from i2iaug.synthetic import planted_clusters

####################################################################
# Data
# ----
# 5,000 users, 500 items in 20 clusters, 3 to 5 clicks per user and one
# click in five replaced by cross-cluster noise. The last click of each
# user is held out for testing, the one before it for validation.

planted = planted_clusters(spread=1.5, min_history=3, max_history=5, zipf=0.5,
                           tail_weight=0.5, noise=0.2, seed=0)
ds = planted.dataset
split = chronological_split(ds)
train = split.train_dataset(ds)
print(ds)
print(split.summary())

####################################################################
# Generator and discriminator
# ---------------------------
# Long-tail targets weigh 4x in the generator's cross-entropy. The
# discriminator learns a bilinear yes/no score from real clicks and
# uniformly sampled non-clicks.

gen = train_generator(ds, split, GeneratorConfig(epochs=6, learning_rate=0.1))
disc = train_discriminator(ds, split, DiscriminatorConfig(epochs=10, learning_rate=0.1))
print("generator loss", [round(x, 3) for x in gen.loss_history])
print("discriminator loss", [round(x, 3) for x in disc.loss_history])

####################################################################
# Augment
# -------
# Three candidates per user, kept when the discriminator says yes with at
# least 0.5 confidence. A sigmoid never reaches exactly 1.0, so the
# deployment default of 1.0 would keep nothing with the local model.

cfg = AugmentationConfig(recall_number=3, confidence_threshold=0.5)
aug = augment(train, gen, disc, cfg)
print(aug.report.to_dict())
tail_share = sum(ds.is_long_tail(c.item_id) for c in aug.accepted) / max(len(aug.accepted), 1)
print(f"long-tail share of accepted pairs: {tail_share:.3f}")

####################################################################
# Baseline vs augmented Swing
# ---------------------------
# Both runs are scored through the serving path: each test user's 100 most
# recent training items query the index and the merged top 10 is ranked.

swing = BackendConfig(name="swing")
base = evaluate(build_neighbors(train.interactions(), swing), split, ds, label="baseline")
augd = evaluate(build_neighbors(aug.merged(), swing), split, ds, label="augmented")
print(format_table([base, augd]))

####################################################################
# A stricter filter
# -----------------
# Raising the threshold keeps a subset of the accepted pairs.

strict = augment(train, gen, disc, replace(cfg, confidence_threshold=0.9))
print("accepted at 0.5:", aug.report.accepted, " at 0.9:", strict.report.accepted)
