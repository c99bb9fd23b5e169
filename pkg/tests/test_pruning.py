import csv
import json
from functools import partial

import numpy as np
import pytest

import prnet.pruning as pruning
from prnet.attribution import rank_loci
from prnet.dataset import LocusId, loci_for_genes, restrict_to_loci
from prnet.errors import ConstraintViolation, DivergenceError, NoSignalError
from prnet.network import TrainConfig, count_params
from prnet.pathway import build_masks
from prnet.pipeline import train_full
from prnet.pruning import (
    PRNet,
    SelectionConfig,
    assemble_prnet,
    filter_nonzero,
    gene_rollup,
    load_g1,
    loci_of_genes,
    select_optimal,
)

FAST = TrainConfig(epochs=8, learning_rate=1e-2)


def ranking(pairs):
    loci = [LocusId(*l) if isinstance(l, tuple) else LocusId(l, "mutation") for l, _ in pairs]
    return rank_loci(loci, [s for _, s in pairs])


class TestFilter:
    def test_drops_zeros_keeps_order(self):
        r = filter_nonzero(ranking([("A", 2), ("B", 0), ("C", 1), ("D", 0)]))
        assert [l.gene for l in r.loci] == ["A", "C"]
        assert r.scores.tolist() == [2.0, 1.0]

    def test_all_positive_identity(self):
        r = ranking([("A", 3), ("B", 1)])
        assert filter_nonzero(r).loci == r.loci

    def test_nothing_left(self):
        with pytest.raises(NoSignalError):
            filter_nonzero(ranking([("A", 0), ("B", 0)]))

    def test_reference_shaped_fixture(self):
        rng = np.random.default_rng(0)
        scores = np.where(rng.random(27687) < 0.62, 0.0, rng.random(27687))
        loci = [LocusId(f"G{i // 3}", ("mutation", "cnv_amp", "cnv_del")[i % 3]) for i in range(27687)]
        assert len(filter_nonzero(rank_loci(loci, scores))) == int(np.count_nonzero(scores))


class TestRollup:
    def test_hand_sums(self):
        r = ranking([(("A", "mutation"), 1), (("A", "cnv_amp"), 2), (("A", "cnv_del"), 0), (("B", "mutation"), 4)])
        assert gene_rollup(r) == [("B", 4.0), ("A", 3.0)]

    def test_single_gene(self):
        assert gene_rollup(ranking([("A", 1)])) == [("A", 1.0)]

    def test_ties_keep_order(self):
        r = ranking([("A", 1), ("B", 1), ("C", 1)])
        assert [g for g, _ in gene_rollup(r)] == ["A", "B", "C"]


class TestSelectionConfig:
    @pytest.mark.parametrize("sizes", [(), (5, 5), (10, 5), (0, 3)])
    def test_rejects_bad_sizes(self, sizes):
        with pytest.raises(ValueError):
            SelectionConfig(candidate_sizes=sizes)

    def test_reference_defaults(self):
        assert SelectionConfig().candidate_sizes == (37, 45, 46, 47, 56, 89, 3751)
        assert SelectionConfig().trials_per_size == 5


@pytest.fixture(scope="module")
def ranked(small_cohort, small_hierarchy):
    train_ds = small_cohort[2]
    from prnet.attribution import importance_ranking
    net, _ = train_full(train_ds, small_hierarchy, TrainConfig(epochs=20, learning_rate=1e-2))
    return gene_rollup(filter_nonzero(importance_ranking(net, train_ds)))


class TestSelect:
    def test_single_size_chosen(self, small_cohort, small_hierarchy, ranked):
        _, _, tr, te = small_cohort
        res = select_optimal(tr, te, partial(build_masks, small_hierarchy), ranked,
                             SelectionConfig((4,), trials_per_size=1), FAST)
        assert res.chosen_size == 4
        assert len(res.g1) == 12
        assert res.g1 == tuple(loci_for_genes([g for g, _ in ranked[:4]]))

    def test_curve_reproducible_and_argmax(self, small_cohort, small_hierarchy, ranked):
        _, _, tr, te = small_cohort
        cfg = SelectionConfig((2, 6, 12), trials_per_size=2, seed=3)
        a = select_optimal(tr, te, partial(build_masks, small_hierarchy), ranked, cfg, FAST)
        b = select_optimal(tr, te, partial(build_masks, small_hierarchy), ranked, cfg, FAST)
        assert [p.values for p in a.curve] == [p.values for p in b.curve]
        assert a.means()[a.chosen_size] == max(a.means().values())
        assert set(a.g1) <= set(tr.loci)

    def test_each_size_sees_top_genes(self, small_cohort, small_hierarchy, ranked):
        _, _, tr, te = small_cohort
        seen = []

        def builder(loci):
            seen.append(list(loci))
            return build_masks(small_hierarchy, loci)

        select_optimal(tr, te, builder, ranked, SelectionConfig((1, 3, 5), trials_per_size=1), FAST)
        genes = [g for g, _ in ranked]
        assert seen == [loci_for_genes(genes[:k]) for k in (1, 3, 5)]

    def test_ties_go_to_smaller_size(self, small_cohort, small_hierarchy, ranked, monkeypatch):
        _, _, tr, te = small_cohort
        monkeypatch.setattr(pruning, "_score", lambda *a: 0.5)
        res = select_optimal(tr, te, partial(build_masks, small_hierarchy), ranked,
                             SelectionConfig((2, 4, 8), trials_per_size=1), FAST)
        assert res.chosen_size == 2

    def test_diverged_trials_skipped(self, small_cohort, small_hierarchy, ranked, monkeypatch):
        _, _, tr, te = small_cohort
        real = pruning.train
        calls = {"n": 0}

        def flaky(net, ds, cfg):
            calls["n"] += 1
            if calls["n"] % 2 == 1:
                raise DivergenceError("boom", epoch=1, learning_rate=cfg.learning_rate)
            return real(net, ds, cfg)

        monkeypatch.setattr(pruning, "train", flaky)
        res = select_optimal(tr, te, partial(build_masks, small_hierarchy), ranked,
                             SelectionConfig((3,), trials_per_size=3), FAST)
        assert len(res.curve[0].values) == 1

    def test_all_trials_diverged(self, small_cohort, small_hierarchy, ranked, monkeypatch):
        _, _, tr, te = small_cohort

        def broken(net, ds, cfg):
            raise DivergenceError("boom", epoch=1, learning_rate=cfg.learning_rate)

        monkeypatch.setattr(pruning, "train", broken)
        with pytest.raises(DivergenceError, match="size 3"):
            select_optimal(tr, te, partial(build_masks, small_hierarchy), ranked,
                           SelectionConfig((3,), trials_per_size=2), FAST)

    def test_size_beyond_ranking(self, small_cohort, small_hierarchy, ranked):
        _, _, tr, te = small_cohort
        with pytest.raises(ValueError):
            select_optimal(tr, te, partial(build_masks, small_hierarchy), ranked,
                           SelectionConfig((len(ranked) + 1,)), FAST)

    def test_write_outputs(self, small_cohort, small_hierarchy, ranked, tmp_path):
        _, _, tr, te = small_cohort
        res = select_optimal(tr, te, partial(build_masks, small_hierarchy), ranked,
                             SelectionConfig((2, 4), trials_per_size=1), FAST)
        res.ranking_digest = "abc"
        paths = res.write(tmp_path)
        rows = list(csv.reader(paths["curve"].open()))
        assert rows[0] == ["size", "mean_recall", "std", "n_loci"]
        assert [r[0] for r in rows[1:]] == ["2", "4"]
        manifest = json.loads(paths["g1"].read_text())
        assert manifest["source_ranking"] == "abc"
        assert load_g1(paths["g1"]) == list(res.g1)


class TestAssemble:
    def test_all_loci_matches_full_structure(self, small_cohort, small_hierarchy):
        tr = small_cohort[2]
        pr = assemble_prnet(tr, tr.loci, small_hierarchy, FAST)
        assert pr.network.masks == build_masks(small_hierarchy, tr.loci)

    def test_smaller_and_guarded(self, small_cohort, small_hierarchy):
        _, _, tr, te = small_cohort
        g1 = loci_of_genes(tr.genes[:5])
        pr = assemble_prnet(tr, g1, small_hierarchy, FAST)
        full, _ = train_full(tr, small_hierarchy, FAST)
        assert isinstance(pr, PRNet)
        assert pr.count_params()["total"] < count_params(full)["total"]
        assert pr.predict(te).shape == (te.n,)
        dropped = restrict_to_loci(te, [l for l in te.loci if l.gene != tr.genes[2]])
        with pytest.raises(ConstraintViolation, match=tr.genes[2]):
            pr.predict(dropped)

    def test_recipe_reports(self, small_cohort):
        tr = small_cohort[2]
        recipe = pruning.RestrictionRecipe(tuple(loci_of_genes(tr.genes[:2])))
        assert recipe.check(tr).passed
        assert recipe.apply(tr).loci == recipe.g1

    def test_empty_g1(self, small_cohort, small_hierarchy):
        with pytest.raises(ValueError):
            assemble_prnet(small_cohort[2], [], small_hierarchy, FAST)
