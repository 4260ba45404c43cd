"""Item-to-item recommendation with generated and filtered synthetic interactions.

The package trains a candidate generator that favours long-tail items, a
discriminator that scores (user, item) plausibility, merges accepted
synthetic clicks into the log, and builds Swing / BM25 / BPR neighbor lists
served from an inverted index.
"""

__version__ = "0.1.0"

from .augmentation import (AugmentationConfig, AugmentedDataset, SyntheticCandidate, augment,
                           filter_candidates, merge)
from .backends import (BackendConfig, BprConfig, build_graph, build_neighbors, bm25_similarity,
                       swing_similarity, topk_neighbors, train_bpr)
from .config import PipelineConfig, load_config
from .data import (Dataset, Interaction, Item, Split, UserHistory, chronological_split, ingest,
                   label_long_tail, truncate_history)
from .discriminator import DiscriminatorConfig, DiscriminatorModel, train_discriminator
from .evaluation import EvalReport, RankedPrediction, evaluate, ndcg_at_k, recall_at_k
from .generator import GeneratorConfig, GeneratorModel, train_generator
from .index import InvertedIndex, LookupRequest, LookupResponse, build_index
from .pipeline import run_experiment_grid, run_pipeline

__all__ = [
    "AugmentationConfig", "AugmentedDataset", "BackendConfig", "BprConfig", "Dataset",
    "DiscriminatorConfig", "DiscriminatorModel", "EvalReport", "GeneratorConfig",
    "GeneratorModel", "Interaction", "InvertedIndex", "Item", "LookupRequest", "LookupResponse",
    "PipelineConfig", "RankedPrediction", "Split", "SyntheticCandidate", "UserHistory",
    "augment", "bm25_similarity", "build_graph", "build_index", "build_neighbors",
    "chronological_split", "evaluate", "filter_candidates", "ingest", "label_long_tail",
    "load_config", "merge", "ndcg_at_k", "recall_at_k", "run_experiment_grid", "run_pipeline",
    "swing_similarity", "topk_neighbors", "train_bpr", "train_discriminator",
    "train_generator", "truncate_history",
]
