"""
Write a planted interaction log for the command-line pipeline
=============================================================

Produces ``planted/events.tsv`` and ``planted/items.jsonl`` next to this
script; ``pipeline.toml`` points at them.
"""

import json
from pathlib import Path

from i2iaug.data import write_interactions
from i2iaug.synthetic import planted_clusters

out = Path(__file__).parent / "planted"
out.mkdir(exist_ok=True)
planted = planted_clusters(spread=1.5, min_history=3, max_history=5, zipf=0.5,
                           tail_weight=0.5, noise=0.2, seed=0)
write_interactions(planted.dataset.interactions(), out / "events.tsv")
with open(out / "items.jsonl", "w") as fh:
    for i in planted.dataset.item_ids:
        it = planted.dataset.items[i]
        fh.write(json.dumps({"item_id": i, "title": it.title, "category": it.category}) + "\n")
print(planted.dataset)
