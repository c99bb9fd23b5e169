"""End-to-end acceptance checks, one test per criterion."""

import itertools
import json
import math

import numpy as np
import pytest

from oracles import central_difference, joint_mi, max_relative_error, pairwise_auc, random_small_net
from prnet.analysis import mutual_information, point_biserial
from prnet.attribution import deeplift
from prnet.cli import run
from prnet.dataset import (
    Dataset,
    expand_to_universe,
    generate_shifted_family,
    generate_synthetic,
    loci_for_genes,
    restrict_to_loci,
    split,
)
from prnet.errors import ConstraintViolation
from prnet.evaluation import (
    auc,
    generalization_run,
    pnet_spec,
    prnet_spec,
    scaled_sizes,
    standard_models,
    timing_benchmark,
)
from prnet.network import TrainConfig, count_params, flat_gradient, init_network
from prnet.pathway import build_masks, generate_toy_hierarchy, reference_levels
from prnet.pipeline import run_pipeline
from prnet.pruning import SelectionConfig

pytestmark = pytest.mark.slow

SEED = 0


@pytest.fixture(scope="module")
def planted():
    """Full pipeline on the 600-gene cohort with 15 planted genes."""
    ds, truth = generate_synthetic(1200, 600, 15, 0.5, seed=SEED)
    train_ds, test_ds = split(ds, 0.2, seed=SEED)
    hierarchy = generate_toy_hierarchy(600, reference_levels(600), 3, seed=SEED, genes=ds.genes)
    train_cfg = TrainConfig(learning_rate=1e-3, epochs=200, seed=SEED)
    result = run_pipeline(train_ds, test_ds, hierarchy, train_cfg,
                          SelectionConfig((5, 10, 15, 20, 30, 60), 5, seed=SEED))
    return ds, truth, train_ds, test_ds, hierarchy, train_cfg, result


def test_planted_signal_recovery(planted, verdict):
    _, truth, _, test_ds, _, _, result = planted
    chosen = {l.gene for l in result.selection.g1}
    recovered = len(chosen & set(truth.planted_genes)) / len(truth.planted_genes)
    held = result.held_out(test_ds)
    full_auc, pruned_auc = held["P-NET"].auc, held["PR-NET"].auc
    verdict(1, "planted genes recovered and pruned AUC holds",
            recovered >= 0.8 and pruned_auc >= full_auc - 0.03,
            f"recovered {recovered:.0%} with {result.selection.chosen_size} genes, "
            f"AUC {pruned_auc:.3f} vs {full_auc:.3f}")


def test_parameter_reduction(verdict):
    h = generate_toy_hierarchy(9229, reference_levels(9229), 3, seed=SEED)
    g1 = loci_for_genes(list(np.random.default_rng(SEED).choice(h.genes, 46, replace=False)))
    full = init_network(build_masks(h, loci_for_genes(h.genes)), SEED)
    pruned = init_network(build_masks(h, g1), SEED)
    before, after = count_params(full), count_params(pruned)
    drop = 1 - after["total"] / before["total"]
    locus_drop = round(1 - pruned.input_width / full.input_width, 4)
    verdict(2, "input loci and parameters shrink",
            (full.input_width, pruned.input_width, locus_drop) == (27687, 138, 0.995) and drop >= 0.8,
            f"loci {full.input_width} -> {pruned.input_width}, parameters "
            f"{before['total']} -> {after['total']} ({drop:.1%} fewer)")


def test_summation_to_delta(trained_small, verdict):
    net = trained_small[0]
    X = np.random.default_rng(SEED).integers(0, 2, size=(100, net.input_width)).astype(float)
    ds = Dataset([f"s{i}" for i in range(100)], net.loci, X, np.arange(100) % 2)
    cm = deeplift(net, ds, per_head=True)
    worst = float(cm.summation_error().max())
    for k in range(net.depth):
        err = np.abs(cm.heads[k].sum(axis=1) - cm.head_delta[:, k]) / np.maximum(np.abs(cm.head_delta[:, k]), 1e-12)
        worst = max(worst, float(err.max()))
    verdict(3, "contributions sum to the output change", worst <= 1e-6, f"max relative error {worst:.2e}")


def test_gradient_oracle(verdict):
    worst = 0.0
    for seed in range(10):
        net = random_small_net(seed)
        assert net.get_params().size <= 200
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(7, net.input_width))
        y = rng.integers(0, 2, 7)
        worst = max(worst, max_relative_error(flat_gradient(net, X, y, 1.7), central_difference(net, X, y, 1.7)))
    verdict(4, "backprop matches central differences", worst <= 1e-4, f"max relative error {worst:.2e}")


def test_metric_oracles(verdict):
    rng = np.random.default_rng(SEED)
    auc_ok = 0
    for _ in range(1000):
        n = int(rng.integers(2, 30))
        y = rng.integers(0, 2, n)
        y[:2] = (0, 1)
        s = rng.integers(0, 5, n) / 4
        auc_ok += auc(s, y) == pairwise_auc(s, y)
    mi_worst = 0.0
    for n in range(2, 9):
        for counts in itertools.product(range(n + 1), repeat=3):
            if sum(counts) > n:
                continue
            cells = [(0, 0), (0, 1), (1, 0)] + [(1, 1)]
            full = list(counts) + [n - sum(counts)]
            pairs = [c for c, k in zip(cells, full) for _ in range(k)]
            x, y = [a for a, _ in pairs], [b for _, b in pairs]
            mi_worst = max(mi_worst, abs(mutual_information(x, y) - joint_mi(x, y)))
    pb = [point_biserial([0, 1, 0, 1], [0, 1, 0, 1]), point_biserial([1, 0, 1, 0], [0, 1, 0, 1]),
          point_biserial([0, 0, 1, 1], [0, 1, 1, 1])]
    pb_ok = max(abs(a - b) for a, b in zip(pb, [1.0, -1.0, 1 / math.sqrt(3)])) <= 1e-9
    verdict(5, "AUC, MI and correlation match their oracles",
            auc_ok == 1000 and mi_worst <= 1e-12 and pb_ok,
            f"AUC exact on {auc_ok}/1000, MI error {mi_worst:.1e}")


def test_timing(verdict):
    ds, _ = generate_synthetic(1000, 2000, 15, 0.5, seed=SEED)
    train_ds, _ = split(ds, 0.2, seed=SEED)
    h = generate_toy_hierarchy(2000, reference_levels(2000), 3, seed=SEED, genes=ds.genes)
    cfg = TrainConfig(epochs=10, learning_rate=1e-3, early_stop_patience=0, seed=SEED)
    report = timing_benchmark([pnet_spec(h, cfg), prnet_spec(h, cfg, loci_for_genes(ds.genes[:46]))],
                              train_ds, repetitions=5, seed=SEED)
    assert [r[:2] for r in report.rows()] == [("train", "P-NET"), ("train", "PR-NET"),
                                              ("inference", "P-NET"), ("inference", "PR-NET")]
    ratios = {p: report.mean(p, "PR-NET") / report.mean(p, "P-NET") for p in ("train", "inference")}
    verdict(6, "pruned network trains and predicts faster",
            all(r <= 2 / 3 for r in ratios.values()),
            f"time ratio train {ratios['train']:.2f}, inference {ratios['inference']:.2f}")


def test_generalization_harness(planted, verdict):
    ds, truth, _, _, hierarchy, train_cfg, result = planted
    g1 = result.selection.g1
    family = generate_shifted_family(truth, 4, 600, SEED + 1,
                                     required_genes=sorted({l.gene for l in g1}))
    sizes = scaled_sizes((202, 404, 606, 808), 1013, ds.n)
    models = standard_models(hierarchy, train_cfg, g1, {"random_forest": {"n_trees": 50}})
    grid = generalization_run(models, ds, sizes, family, seed=SEED)
    complete = grid.is_complete() and not grid.errors() and len(grid.models) == 7
    pr, full = grid.mean("PR-NET", "recall"), grid.mean("P-NET", "recall")
    verdict(7, "every model completes the grid and the pruned network keeps recall",
            complete and pr >= full,
            f"sizes {sizes}, mean recall PR-NET {pr:.3f} vs P-NET {full:.3f}")


def test_constraint_guard(planted, verdict):
    ds, _, _, test_ds, _, _, result = planted
    target = result.selection.g1[0]
    short = restrict_to_loci(test_ds, [l for l in test_ds.loci if l != target])
    try:
        result.prnet.predict(short)
        named = False
    except ConstraintViolation as exc:
        named = str(target) in str(exc) and exc.missing == [target]
    panel = restrict_to_loci(ds, ds.loci[::2])
    round_trip = restrict_to_loci(expand_to_universe(panel, ds.loci), panel.loci)
    lossless = round_trip.loci == panel.loci and np.array_equal(round_trip.X, panel.X)
    verdict(8, "missing selected loci are refused and re-indexing is lossless", named and lossless,
            f"missing {target} reported")


def test_determinism(tmp_path, monkeypatch, verdict):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "c.json").write_text(json.dumps({
        "seed": 5,
        "data": {"synthetic": {"n": 300, "genes": 60, "planted": 5, "noise": 0.3}},
        "train": {"epochs": 15, "learning_rate": 0.01},
        "selection": {"candidate_sizes": [3, 5, 8], "trials_per_size": 2},
    }))
    for out in ("a", "b"):
        assert run(["prune", "--config", "c.json", "--out", out]) == 0
    csvs = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*.csv"))
    same = all((tmp_path / "a" / p).read_bytes() == (tmp_path / "b" / p).read_bytes() for p in csvs)
    g1 = [json.loads((tmp_path / d / "g1.json").read_text())["loci"] for d in ("a", "b")]
    verdict(9, "repeated runs give identical tables and selection",
            bool(csvs) and same and g1[0] == g1[1], f"{len(csvs)} CSV files compared")
