"""The end-to-end construction: full network -> DeepLIFT ranking -> size sweep -> pruned network."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import partial

from . import metrics
from .attribution import ImportanceRanking, importance_ranking
from .dataset import Dataset
from .network import MaskedNetwork, TrainConfig, TrainReport, init_network, predict, train
from .pathway import PathwayHierarchy, build_masks
from .pruning import PRNet, SelectionConfig, SelectionResult, assemble_prnet, filter_nonzero, gene_rollup, select_optimal

log = logging.getLogger(__name__)


@dataclass
class PipelineResult:
    full: MaskedNetwork
    full_report: TrainReport
    ranking: ImportanceRanking
    nonzero: ImportanceRanking
    ranked_genes: list
    selection: SelectionResult
    prnet: PRNet

    def held_out(self, test_ds: Dataset) -> dict:
        return {
            "P-NET": metrics.threshold_metrics(predict(self.full, test_ds), test_ds.y),
            "PR-NET": metrics.threshold_metrics(self.prnet.predict(test_ds), test_ds.y),
        }


def train_full(train_ds: Dataset, hierarchy: PathwayHierarchy, train_cfg: TrainConfig):
    net = init_network(build_masks(hierarchy, train_ds.loci), train_cfg.seed)
    return train(net, train_ds, train_cfg)


def run_pipeline(
    train_ds: Dataset,
    test_ds: Dataset,
    hierarchy: PathwayHierarchy,
    train_cfg: TrainConfig,
    selection_cfg: SelectionConfig,
) -> PipelineResult:
    """Train the full network, rank loci on the training data, sweep sizes, assemble PR-NET."""
    full, report = train_full(train_ds, hierarchy, train_cfg)
    ranking = importance_ranking(full, train_ds)
    nonzero = filter_nonzero(ranking)
    genes = gene_rollup(nonzero)
    log.info("%d of %d loci carry non-zero importance (%d genes)", len(nonzero), len(ranking), len(genes))
    selection = select_optimal(
        train_ds, test_ds, partial(build_masks, hierarchy), genes, selection_cfg, train_cfg
    )
    selection.ranking_digest = ranking.digest()
    prnet = assemble_prnet(train_ds, selection.g1, hierarchy, train_cfg)
    return PipelineResult(full, report, ranking, nonzero, genes, selection, prnet)
