"""Importance-driven input pruning: candidate-size sweep with retraining and PR-NET assembly."""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import metrics
from .attribution import ImportanceRanking
from .dataset import (
    CHANNELS,
    ConstraintReport,
    Dataset,
    LocusId,
    check_constraints,
    restrict_to_loci,
)
from .errors import DivergenceError, NoSignalError
from .network import MaskedNetwork, TrainConfig, count_params, init_network, predict, train
from .pathway import PathwayHierarchy, build_masks

log = logging.getLogger(__name__)

# Gene counts swept on the 9,229-gene prostate cohort.
REFERENCE_CANDIDATE_SIZES = (37, 45, 46, 47, 56, 89, 3751)

__all__ = [
    "REFERENCE_CANDIDATE_SIZES",
    "SelectionConfig",
    "SelectionResult",
    "filter_nonzero",
    "gene_rollup",
    "loci_of_genes",
    "select_optimal",
    "RestrictionRecipe",
    "PRNet",
    "assemble_prnet",
    "check_constraints",
    "ConstraintReport",
]


def filter_nonzero(r: ImportanceRanking) -> ImportanceRanking:
    """Drop loci whose importance score is exactly zero, keeping the order."""
    keep = r.scores > 0
    if not keep.any():
        raise NoSignalError("every locus has importance zero; the model attributes nothing")
    return ImportanceRanking(tuple(l for l, k in zip(r.loci, keep) if k), r.scores[keep], r.source)


def gene_rollup(r: ImportanceRanking) -> list[tuple[str, float]]:
    """Genes ranked by the sum of their channel scores.

    Ties keep the order in which genes first appear in ``r``, which for
    equal scores is the original locus order.
    """
    totals: dict[str, float] = {}
    for locus, score in r:
        totals[locus.gene] = totals.get(locus.gene, 0.0) + score
    genes = list(totals)
    order = sorted(range(len(genes)), key=lambda i: (-totals[genes[i]], i))
    return [(genes[i], totals[genes[i]]) for i in order]


def loci_of_genes(genes: Sequence[str], available: Sequence[LocusId] | None = None) -> list[LocusId]:
    """All channel loci of ``genes`` in gene order; limited to ``available`` when given."""
    loci = [LocusId(g, c) for g in genes for c in CHANNELS]
    if available is not None:
        have = set(available)
        loci = [l for l in loci if l in have]
    return loci


@dataclass
class SelectionConfig:
    candidate_sizes: tuple = REFERENCE_CANDIDATE_SIZES
    trials_per_size: int = 5
    metric: str = "recall"
    seed: int = 0
    threshold: float = metrics.DEFAULT_THRESHOLD

    def __post_init__(self):
        self.candidate_sizes = tuple(int(k) for k in self.candidate_sizes)
        if not self.candidate_sizes:
            raise ValueError("candidate_sizes is empty")
        if any(k <= 0 for k in self.candidate_sizes):
            raise ValueError("candidate sizes must be positive")
        if any(b <= a for a, b in zip(self.candidate_sizes, self.candidate_sizes[1:])):
            raise ValueError("candidate sizes must be strictly ascending")
        if self.trials_per_size < 1:
            raise ValueError("trials_per_size must be >= 1")
        if self.metric not in ("recall", "auc"):
            raise ValueError(f"unknown selection metric {self.metric!r}")


@dataclass
class CurvePoint:
    size: int
    mean: float
    std: float
    values: list
    wall_time: float
    n_loci: int


@dataclass
class SelectionResult:
    curve: list
    chosen_size: int
    g1: tuple
    g0_size: int
    metric: str = "recall"
    ranking_digest: str = ""

    def means(self) -> dict:
        return {p.size: p.mean for p in self.curve}

    def write(self, out_dir) -> dict:
        """``selection_curve.csv`` plus the ``g1.json`` manifest."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        curve_path = out_dir / "selection_curve.csv"
        with open(curve_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["size", f"mean_{self.metric}", "std", "n_loci"])
            for p in self.curve:
                w.writerow([p.size, repr(p.mean), repr(p.std), p.n_loci])
        g1_path = out_dir / "g1.json"
        g1_path.write_text(json.dumps(self.g1_manifest(), indent=2) + "\n", encoding="utf-8")
        # wall times vary run to run, so they live apart from the byte-stable CSV
        times_path = out_dir / "selection_timings.json"
        times_path.write_text(
            json.dumps({str(p.size): round(p.wall_time, 3) for p in self.curve}, indent=2) + "\n",
            encoding="utf-8",
        )
        return {"curve": curve_path, "g1": g1_path, "timings": times_path}

    def g1_manifest(self) -> dict:
        return {
            "chosen_size": self.chosen_size,
            "g0_size": self.g0_size,
            "metric": self.metric,
            "source_ranking": self.ranking_digest,
            "loci": [str(l) for l in self.g1],
        }


def load_g1(path) -> list[LocusId]:
    return [LocusId.parse(s) for s in json.loads(Path(path).read_text(encoding="utf-8"))["loci"]]


def _trial_seed(seed, size, trial):
    return int(np.random.SeedSequence([seed, size, trial]).generate_state(1)[0])


def _score(metric, scores, y, threshold):
    if metric == "auc":
        return metrics.auc(scores, y)
    return metrics.recall(scores, y, threshold)


def select_optimal(
    train_ds: Dataset,
    test_ds: Dataset,
    masks_builder: Callable,
    ranked_genes,
    cfg: SelectionConfig,
    train_cfg: TrainConfig | None = None,
) -> SelectionResult:
    """Retrain on the top-k genes for every candidate k and keep the best k.

    For each size, ``trials_per_size`` networks with distinct derived seeds
    are trained on ``train_ds`` restricted to the top-k genes (all channels)
    and scored on ``test_ds``. The chosen size maximises the mean score;
    ties go to the smaller size. Diverged trials are skipped.
    """
    train_cfg = train_cfg or TrainConfig()
    genes = [g[0] if isinstance(g, tuple) else g for g in ranked_genes]
    if cfg.candidate_sizes[-1] > len(genes):
        raise ValueError(
            f"candidate size {cfg.candidate_sizes[-1]} exceeds the {len(genes)} ranked genes"
        )
    curve = []
    for size in cfg.candidate_sizes:
        start = time.perf_counter()
        loci = loci_of_genes(genes[:size], train_ds.loci)
        tr = restrict_to_loci(train_ds, loci)
        te = restrict_to_loci(test_ds, loci)
        stack = masks_builder(loci)
        values = []
        for trial in range(cfg.trials_per_size):
            seed = _trial_seed(cfg.seed, size, trial)
            try:
                net, _ = train(init_network(stack, seed), tr, train_cfg.replace(seed=seed))
            except DivergenceError as exc:
                log.warning("size %d trial %d diverged: %s", size, trial, exc)
                continue
            values.append(_score(cfg.metric, predict(net, te), te.y, cfg.threshold))
        if not values:
            raise DivergenceError(f"every trial diverged at candidate size {size}")
        curve.append(CurvePoint(size, float(np.mean(values)), float(np.std(values)), values,
                                time.perf_counter() - start, len(loci)))
        log.info("size %d: %s %.4f +/- %.4f", size, cfg.metric, curve[-1].mean, curve[-1].std)

    best = max(range(len(curve)), key=lambda i: (curve[i].mean, -i))
    chosen = curve[best].size
    return SelectionResult(
        curve=curve,
        chosen_size=chosen,
        g1=tuple(loci_of_genes(genes[:chosen], train_ds.loci)),
        g0_size=train_ds.m,
        metric=cfg.metric,
    )


@dataclass
class RestrictionRecipe:
    """Front-end that maps any incoming dataset onto the selected loci."""

    g1: tuple
    tolerance: float = 0.0

    def check(self, ds: Dataset) -> ConstraintReport:
        return check_constraints(ds.loci, self.g1, self.tolerance)

    def apply(self, ds: Dataset) -> Dataset:
        if tuple(ds.loci) == tuple(self.g1):
            return ds
        return restrict_to_loci(ds, self.g1, self.tolerance)


@dataclass
class PRNet:
    """A network trained on the selected loci together with its input restriction."""

    network: MaskedNetwork
    recipe: RestrictionRecipe
    report: object = None
    extra: dict = field(default_factory=dict)

    @property
    def g1(self):
        return self.recipe.g1

    def predict(self, ds: Dataset) -> np.ndarray:
        return predict(self.network, self.recipe.apply(ds))

    def count_params(self) -> dict:
        return count_params(self.network)


def assemble_prnet(
    full_train_ds: Dataset,
    g1: Sequence[LocusId],
    hierarchy: PathwayHierarchy,
    train_cfg: TrainConfig,
    seed: int | None = None,
    tolerance: float = 0.0,
) -> PRNet:
    """Train the pruned network on ``full_train_ds`` restricted to ``g1``."""
    g1 = tuple(LocusId(*l) for l in g1)
    if not g1:
        raise ValueError("g1 is empty")
    recipe = RestrictionRecipe(g1, tolerance)
    data = recipe.apply(full_train_ds)
    seed = train_cfg.seed if seed is None else seed
    net = init_network(build_masks(hierarchy, g1), seed)
    net, report = train(net, data, train_cfg.replace(seed=seed))
    return PRNet(net, recipe, report)
