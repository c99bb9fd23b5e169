"""Pathway-masked sparse networks with importance-driven input pruning.

Typical flow::

    ds, truth = generate_synthetic(1200, 600, 15, 0.5, seed=0)
    train_ds, test_ds = split(ds, 0.2, seed=0)
    h = generate_toy_hierarchy(600, reference_levels(600), 3, seed=0, genes=ds.genes)
    result = run_pipeline(train_ds, test_ds, h, TrainConfig(epochs=200), SelectionConfig((5, 10, 15, 20, 30, 60)))
    result.held_out(test_ds)
"""

__version__ = "0.1.0"

from .attribution import ImportanceRanking, deeplift, importance_ranking
from .dataset import (
    Dataset,
    LocusId,
    expand_to_universe,
    generate_shifted_family,
    generate_synthetic,
    load_dataset,
    restrict_to_loci,
    split,
    subsample,
)
from .errors import (
    ConstraintViolation,
    CoverageError,
    DivergenceError,
    PRNetError,
    UndefinedMetricError,
)
from .metrics import MetricSet, auc, threshold_metrics
from .network import MaskedNetwork, TrainConfig, count_params, init_network, predict, train
from .pathway import PathwayHierarchy, build_masks, generate_toy_hierarchy, load_hierarchy, reference_levels
from .evaluation import generalization_run, standard_models
from .pipeline import run_pipeline, train_full
from .pruning import PRNet, SelectionConfig, assemble_prnet, select_optimal

__all__ = [
    "Dataset", "LocusId", "load_dataset", "split", "subsample", "expand_to_universe",
    "restrict_to_loci", "generate_synthetic", "generate_shifted_family",
    "PathwayHierarchy", "build_masks", "generate_toy_hierarchy", "load_hierarchy", "reference_levels",
    "MaskedNetwork", "TrainConfig", "init_network", "train", "predict", "count_params",
    "ImportanceRanking", "deeplift", "importance_ranking",
    "SelectionConfig", "select_optimal", "assemble_prnet", "PRNet", "run_pipeline", "train_full",
    "generalization_run", "standard_models",
    "MetricSet", "auc", "threshold_metrics",
    "PRNetError", "ConstraintViolation", "CoverageError", "DivergenceError", "UndefinedMetricError",
]
