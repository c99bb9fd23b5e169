import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prnet.analysis import point_biserial
from prnet.dataset import (
    CHANNELS,
    Dataset,
    LocusId,
    SyntheticTruth,
    check_constraints,
    expand_to_universe,
    generate_shifted_family,
    generate_synthetic,
    load_dataset,
    loci_for_genes,
    restrict_to_loci,
    save_dataset_csv,
    split,
    subsample,
)
from prnet.errors import ConstraintViolation, CoverageError, DatasetError, ParseError


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def trio(tmp_path, mutation, cna, labels):
    return (write(tmp_path / "mut.csv", mutation), write(tmp_path / "cna.csv", cna),
            write(tmp_path / "labels.csv", labels))


def toy(n=3, genes=("A", "B"), seed=0, name="toy"):
    rng = np.random.default_rng(seed)
    loci = loci_for_genes(genes)
    X = rng.integers(0, 2, size=(n, len(loci)))
    y = np.arange(n) % 2
    return Dataset(tuple(f"s{i}" for i in range(n)), tuple(loci), X, y, name=name)


class TestLocusId:
    def test_round_trip_through_text(self):
        l = LocusId("AR", "cnv_amp")
        assert str(l) == "AR(cnv_amp)"
        assert LocusId.parse(str(l)) == l

    def test_gene_major_channel_order(self):
        assert loci_for_genes(["X", "Y"]) == [LocusId("X", c) for c in CHANNELS] + [LocusId("Y", c) for c in CHANNELS]

    def test_duplicates_rejected(self):
        with pytest.raises(DatasetError):
            Dataset(("a",), (LocusId("A", "mutation"),) * 2, np.zeros((1, 2)), [1])

    def test_unknown_channel_rejected(self):
        with pytest.raises(DatasetError):
            Dataset(("a",), (LocusId("A", "fusion"),), np.zeros((1, 1)), [1])


class TestLoad:
    def test_cna_thresholding_by_hand(self, tmp_path):
        # each CNA cell checked against >= 2 (amp) and <= -2 (del)
        paths = trio(tmp_path,
                     "sample_id,G1,G2\ns1,1,0\ns2,0,1\ns3,0,0\n",
                     "sample_id,G1,G2\ns1,2,-2\ns2,1,2\ns3,-2,-1\n",
                     "sample_id,response\ns1,CRPC\ns2,primary\ns3,CRPC\n")
        ds = load_dataset(*paths)
        assert ds.loci == tuple(loci_for_genes(["G1", "G2"]))
        expected = np.array([
            # G1 mut amp del, G2 mut amp del
            [1, 1, 0, 0, 0, 1],
            [0, 0, 0, 1, 1, 0],
            [0, 0, 1, 0, 0, 0],
        ])
        np.testing.assert_array_equal(ds.X, expected)
        np.testing.assert_array_equal(ds.y, [1, 0, 1])

    def test_blank_cells_become_zero(self, tmp_path):
        paths = trio(tmp_path, "sample_id,A,B,C\ns1,,,\ns2,,,\n", "sample_id,A,B,C\ns1,,,\ns2,,,\n",
                     "sample_id,response\ns1,CRPC\ns2,primary\n")
        ds = load_dataset(*paths)
        assert ds.X.shape == (2, 9)
        assert not ds.X.any()

    def test_reference_shaped_label_counts(self, tmp_path):
        ids = [f"P{i:04d}" for i in range(1013)]
        labels = ["CRPC"] * 333 + ["primary"] * 680
        mut = "sample_id,AR\n" + "".join(f"{s},0\n" for s in ids)
        lab = "sample_id,response\n" + "".join(f"{s},{l}\n" for s, l in zip(ids, labels))
        ds = load_dataset(*trio(tmp_path, mut, mut, lab))
        assert (ds.n, ds.n_positive, ds.m) == (1013, 333, 3)

    def test_unlabelled_samples_dropped_with_count(self, tmp_path):
        paths = trio(tmp_path, "sample_id,A\ns1,1\ns2,0\ns3,1\n", "sample_id,A\ns1,0\ns4,2\n",
                     "sample_id,response\ns1,CRPC\ns2,primary\n")
        with pytest.warns(UserWarning, match="dropped 2 samples"):
            ds = load_dataset(*paths)
        assert ds.sample_ids == ("s1", "s2")

    def test_malformed_row_reports_line(self, tmp_path):
        paths = trio(tmp_path, "sample_id,A,B\ns1,1,0\ns2,1\n", "sample_id,A,B\ns1,0,0\n",
                     "sample_id,response\ns1,CRPC\ns2,primary\n")
        with pytest.raises(ParseError, match=":3:") as info:
            load_dataset(*paths)
        assert info.value.line == 3

    def test_out_of_range_value(self, tmp_path):
        paths = trio(tmp_path, "sample_id,A\ns1,3\n", "sample_id,A\ns1,0\n", "sample_id,response\ns1,CRPC\n")
        with pytest.raises(ParseError):
            load_dataset(*paths)

    def test_duplicate_sample(self, tmp_path):
        paths = trio(tmp_path, "sample_id,A\ns1,1\ns1,0\n", "sample_id,A\ns1,0\n", "sample_id,response\ns1,CRPC\n")
        with pytest.raises(DatasetError, match="duplicate"):
            load_dataset(*paths)

    def test_no_samples_left(self, tmp_path):
        paths = trio(tmp_path, "sample_id,A\ns1,1\n", "sample_id,A\ns1,0\n", "sample_id,response\nzz,CRPC\n")
        with pytest.raises(DatasetError, match="no labelled samples"):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                load_dataset(*paths)

    def test_loading_is_idempotent_and_matches_export(self, tmp_path):
        ds, _ = generate_synthetic(60, 10, 2, 0.5, seed=4)
        paths = save_dataset_csv(ds, tmp_path, "syn")
        a = load_dataset(paths["mutation"], paths["cna"], paths["labels"])
        b = load_dataset(paths["mutation"], paths["cna"], paths["labels"])
        assert a == b == ds


class TestSplit:
    def test_reference_counts(self):
        y = np.array([1] * 333 + [0] * 680)
        ds = Dataset(tuple(map(str, range(1013))), (LocusId("A", "mutation"),), np.zeros((1013, 1)), y)
        train, test = split(ds, 0.2, seed=7)
        assert (test.n_positive, test.n_negative) == (67, 136)
        assert train.n + test.n == 1013
        assert not set(train.sample_ids) & set(test.sample_ids)

    def test_two_by_two_halves(self):
        ds = Dataset(("a", "b", "c", "d"), (LocusId("A", "mutation"),), np.zeros((4, 1)), [1, 1, 0, 0])
        train, test = split(ds, 0.5, seed=0)
        assert (train.n_positive, train.n_negative, test.n_positive, test.n_negative) == (1, 1, 1, 1)

    def test_deterministic(self):
        ds, _ = generate_synthetic(100, 5, 1, 0.5, seed=1)
        assert split(ds, 0.3, 9)[1].sample_ids == split(ds, 0.3, 9)[1].sample_ids

    def test_single_member_class_fails(self):
        ds = Dataset(tuple("abcd"), (LocusId("A", "mutation"),), np.zeros((4, 1)), [1, 0, 0, 0])
        with pytest.raises(DatasetError, match="stratification"):
            split(ds, 0.5, 0)

    @settings(max_examples=40, deadline=None)
    @given(pos=st.integers(2, 60), neg=st.integers(2, 60), frac=st.floats(0.1, 0.9), seed=st.integers(0, 99))
    def test_prior_preserved(self, pos, neg, frac, seed):
        y = np.array([1] * pos + [0] * neg)
        ds = Dataset(tuple(map(str, range(y.size))), (LocusId("A", "mutation"),), np.zeros((y.size, 1)), y)
        train, test = split(ds, frac, seed)
        for count, got in ((pos, test.n_positive), (neg, test.n_negative)):
            assert abs(got - count * frac) <= 0.5 + 1e-9 or got in (1, count - 1)
        prior = pos / y.size
        for side in (train, test):
            # rounding moves each class by at most half a sample, which only
            # bounds the prior once the side holds a class's worth of samples
            if side.n >= min(pos, neg):
                assert abs(side.n_positive / side.n - prior) <= 1 / min(pos, neg) + 1e-12


class TestSubsample:
    def test_exact_sizes_and_strata(self):
        ds, _ = generate_synthetic(1013, 5, 1, 0.5, seed=2)
        for size in (202, 404, 606, 808):
            sub = subsample(ds, size, seed=1)
            assert sub.n == size
            assert abs(sub.n_positive - ds.n_positive * size / ds.n) <= 1

    def test_full_size_is_identity(self):
        ds = toy(6)
        assert subsample(ds, 6, 0) is ds


class TestExpandRestrict:
    def test_zero_fill(self):
        a, b = LocusId("A", "mutation"), LocusId("B", "mutation")
        ds = Dataset(("s",), (a,), [[1.0]], [1])
        out = expand_to_universe(ds, [a, b])
        np.testing.assert_array_equal(out.X, [[1.0, 0.0]])

    def test_identity_universe(self):
        ds = toy(4)
        out = expand_to_universe(ds, ds.loci)
        assert out.X.tobytes() == ds.X.tobytes()

    def test_hand_layout(self):
        # 3 samples over loci (B.mut, A.del) placed into a 6-locus universe
        universe = loci_for_genes(["A", "B"])
        loci = (LocusId("B", "mutation"), LocusId("A", "cnv_del"))
        ds = Dataset(("s1", "s2", "s3"), loci, [[1, 0], [0, 1], [1, 1]], [1, 0, 1])
        expected = np.array([
            [0, 0, 0, 1, 0, 0],
            [0, 0, 1, 0, 0, 0],
            [0, 0, 1, 1, 0, 0],
        ])
        np.testing.assert_array_equal(expand_to_universe(ds, universe).X, expected)

    def test_locus_outside_universe(self):
        ds = toy(2, genes=("A", "Z"))
        with pytest.raises(CoverageError) as info:
            expand_to_universe(ds, loci_for_genes(["A"]))
        assert set(info.value.offenders) == set(loci_for_genes(["Z"]))

    def test_restrict_picks_columns_in_order(self):
        loci = loci_for_genes(["A"]) + [LocusId("B", "mutation")]
        X = np.arange(8).reshape(2, 4)
        ds = Dataset(("a", "b"), tuple(loci), X, [0, 1])
        out = restrict_to_loci(ds, [loci[3], loci[1]])
        np.testing.assert_array_equal(out.X, X[:, [3, 1]])

    def test_restrict_identity(self):
        ds = toy(3)
        assert restrict_to_loci(ds, ds.loci) == ds

    def test_missing_locus_named(self):
        ds = toy(3, genes=("A",))
        with pytest.raises(ConstraintViolation, match=r"B\(mutation\)"):
            restrict_to_loci(ds, [LocusId("A", "mutation"), LocusId("B", "mutation")])

    def test_tolerance_zero_fills_with_warning(self):
        ds = toy(3, genes=("A", "B", "C"))
        g1 = list(ds.loci[:5]) + [LocusId("Q", "mutation")]
        with pytest.warns(UserWarning):
            out = restrict_to_loci(ds, g1, tolerance=0.2)
        assert not out.X[:, -1].any()
        with pytest.raises(ConstraintViolation):
            restrict_to_loci(ds, g1, tolerance=0.1)

    @settings(max_examples=60, deadline=None)
    @given(data=st.data())
    def test_expand_then_restrict_round_trip(self, data):
        genes = [f"G{i}" for i in range(data.draw(st.integers(1, 6)))]
        universe = loci_for_genes(genes)
        picked = data.draw(st.lists(st.sampled_from(universe), min_size=1, unique=True))
        n = data.draw(st.integers(1, 8))
        X = np.asarray(data.draw(st.lists(st.lists(st.integers(0, 1), min_size=len(picked), max_size=len(picked)),
                                          min_size=n, max_size=n)))
        ds = Dataset(tuple(f"s{i}" for i in range(n)), tuple(picked), X.reshape(n, len(picked)), [i % 2 for i in range(n)])
        back = restrict_to_loci(expand_to_universe(ds, universe), ds.loci)
        assert back == ds
        assert back.X.tobytes() == ds.X.tobytes()


class TestConstraints:
    def test_subset_passes(self):
        g0 = loci_for_genes(["A", "B"])
        assert check_constraints(g0, g0[:2]).passed

    def test_equal_sets_pass(self):
        g0 = loci_for_genes(["A", "B"])
        assert check_constraints(g0, g0).passed

    def test_two_outsiders_listed(self):
        g0 = [LocusId(f"G{i}", "mutation") for i in range(10)]
        outsiders = [LocusId("X", "mutation"), LocusId("Y", "cnv_del")]
        report = check_constraints(g0, g0[:3] + outsiders)
        assert not report.passed and not report.acceptable
        assert report.missing == outsiders


class TestSynthetic:
    def test_deterministic(self):
        a, ta = generate_synthetic(200, 30, 3, 0.5, seed=5)
        b, tb = generate_synthetic(200, 30, 3, 0.5, seed=5)
        assert a == b and ta.planted_genes == tb.planted_genes

    def test_truth_is_consistent(self):
        ds, truth = generate_synthetic(200, 30, 3, 0.5, seed=5)
        assert set(truth.planted_genes) <= set(ds.genes)
        assert len(truth.planted_genes) == 3
        assert set(truth.effect_sizes) == set(truth.planted_genes)
        assert ds.n_positive > 0 and ds.n_negative > 0

    def test_all_planted(self):
        ds, truth = generate_synthetic(100, 8, 8, 0.5, seed=1)
        assert set(truth.planted_genes) == set(ds.genes)

    def test_single_noiseless_gene_tracks_label(self):
        # the label reads all three channels of the planted gene, so the
        # gene's weighted score (not its mutation column alone) carries y
        ds, truth = generate_synthetic(400, 5, 1, 0.0, seed=3, effect_scale=10.0)
        score = ds.X @ truth.coefficients(ds.loci)
        np.testing.assert_array_equal(ds.y, (score > truth.offset).astype(int))
        assert point_biserial(score, ds.y) > 0.9

    def test_noise_columns_uncorrelated(self):
        ds, truth = generate_synthetic(1000, 200, 5, 0.5, seed=8)
        planted = set(truth.planted_genes)
        small, total = 0, 0
        for j, locus in enumerate(ds.loci):
            if locus.gene in planted or ds.X[:, j].std() == 0:
                continue
            total += 1
            small += abs(point_biserial(ds.X[:, j], ds.y)) < 0.15
        assert small / total >= 0.95

    def test_truth_json_round_trip(self, tmp_path):
        _, truth = generate_synthetic(100, 10, 2, 0.5, seed=2)
        truth.save(tmp_path / "t.json")
        back = SyntheticTruth.load(tmp_path / "t.json")
        assert back.to_json() == truth.to_json()
        assert json.loads((tmp_path / "t.json").read_text())["planted_genes"]

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            generate_synthetic(100, 5, 6, 0.5, seed=0)
        with pytest.raises(ValueError):
            generate_synthetic(10, 5, 1, 0.5, seed=0)

    def test_shifted_family_shares_planted_genes(self):
        _, truth = generate_synthetic(300, 40, 4, 0.5, seed=6)
        extra = [g for g in truth.genes if g not in truth.planted_genes][:3]
        family = generate_shifted_family(truth, 3, 150, seed=1, required_genes=extra)
        assert len(family) == 3
        for ds in family:
            assert set(truth.planted_genes) | set(extra) <= set(ds.genes)
            assert ds.n == 150
        assert len({ds.m for ds in family}) >= 1
        assert family[0].name != family[1].name
