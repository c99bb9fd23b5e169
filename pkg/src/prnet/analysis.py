"""Association of loci with the response: point-biserial correlation, mutual information, ranking deltas."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from .attribution import ImportanceRanking
from .dataset import Dataset, LocusId, restrict_to_loci
from .errors import UndefinedMetricError


def point_biserial(x, y) -> float:
    """Pearson correlation between a feature and a binary outcome."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size or x.size < 2:
        raise ValueError("x and y need the same length >= 2")
    if np.unique(y).size != 2:
        raise UndefinedMetricError("correlation with a single-class outcome is undefined")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = xc @ xc
    if sxx == 0:
        raise UndefinedMetricError("correlation with a constant feature is undefined")
    r = (xc @ yc) / np.sqrt(sxx * (yc @ yc))
    return float(np.clip(r, -1.0, 1.0))


def discretize(x) -> np.ndarray:
    """Integer codes for ``x``; non-integer real values are split at the median into 2 bins."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if np.all(x == np.round(x)):
        return np.unique(x, return_inverse=True)[1]
    return (x > np.median(x)).astype(np.intp)


def mutual_information(x, y) -> float:
    """Plug-in mutual information in nats from the empirical joint distribution."""
    a = discretize(x)
    b = discretize(y)
    if a.size != b.size or a.size < 2:
        raise ValueError("x and y need the same length >= 2")
    joint = np.zeros((a.max() + 1, b.max() + 1))
    np.add.at(joint, (a, b), 1.0)
    joint /= a.size
    pa = joint.sum(axis=1, keepdims=True)
    pb = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    mi = float(np.sum(joint[nz] * np.log(joint[nz] / (pa @ pb)[nz])))
    return max(mi, 0.0)


def entropy(x) -> float:
    codes = discretize(x)
    p = np.bincount(codes) / codes.size
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


@dataclass
class RankingDelta:
    locus: LocusId
    rank_before: int | None
    rank_after: int | None
    score_before: float | None
    score_after: float | None

    @property
    def delta(self) -> float | None:
        if self.score_before is None or self.score_after is None:
            return None
        return self.score_after - self.score_before


@dataclass
class RankingComparison:
    rows: list
    spearman: float | None
    common: int

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["gene", "channel", "rank_before", "rank_after", "score_before", "score_after", "delta"])
            for r in self.rows:
                w.writerow([r.locus.gene, r.locus.channel, r.rank_before, r.rank_after,
                            _fmt(r.score_before), _fmt(r.score_after), _fmt(r.delta)])
            w.writerow(["#spearman", "", "", "", "", "", _fmt(self.spearman)])


def _fmt(v):
    return "" if v is None else repr(float(v))


def compare_rankings(before: ImportanceRanking, after: ImportanceRanking, top_k: int) -> RankingComparison:
    """Rank and score changes for every locus in either top-k list.

    Spearman correlation is computed over the rows ranked in both lists;
    it is None when fewer than two such rows exist.
    """
    if top_k > min(len(before), len(after)):
        raise ValueError(f"top_k={top_k} exceeds a ranking's length")
    rb, ra = before.rank_of(), after.rank_of()
    sb, sa = before.score_of(), after.score_of()
    loci = list(dict.fromkeys(list(before.loci[:top_k]) + list(after.loci[:top_k])))
    rows = [RankingDelta(l, rb.get(l), ra.get(l), sb.get(l), sa.get(l)) for l in loci]
    both = [r for r in rows if r.rank_before is not None and r.rank_after is not None]
    rho = None
    if len(both) >= 2:
        rho = float(spearmanr([r.rank_before for r in both], [r.rank_after for r in both])[0])
    return RankingComparison(rows, rho, len(both))


@dataclass
class AssociationRow:
    locus: LocusId
    correlation: float | None
    mutual_info: float
    rank_corr: int = 0
    rank_mi: int = 0


@dataclass
class AssociationReport:
    dataset_id: str
    rows: list = field(default_factory=list)

    def by_correlation(self) -> list:
        return sorted(self.rows, key=lambda r: r.rank_corr)

    def by_mutual_info(self) -> list:
        return sorted(self.rows, key=lambda r: r.rank_mi)

    def to_csv(self, path, append=False):
        mode = "a" if append else "w"
        with open(path, mode, newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if not append:
                w.writerow(["dataset_id", "gene", "channel", "correlation", "mi_nats", "rank_corr", "rank_mi"])
            for r in self.rows:
                w.writerow([self.dataset_id, r.locus.gene, r.locus.channel, _fmt(r.correlation),
                            repr(r.mutual_info), r.rank_corr, r.rank_mi])


def association_report(ds: Dataset, loci_subset=None, dataset_id: str | None = None) -> AssociationReport:
    """Correlation and MI of each locus with the response, plus both rankings.

    Correlation ranks order by |r| (undefined correlations last); ties keep
    the subset order.
    """
    if loci_subset is not None:
        ds = restrict_to_loci(ds, list(loci_subset))
    rows = []
    for j, locus in enumerate(ds.loci):
        try:
            r = point_biserial(ds.X[:, j], ds.y)
        except UndefinedMetricError:
            r = None
        rows.append(AssociationRow(locus, r, mutual_information(ds.X[:, j], ds.y)))
    corr_key = [(-(abs(r.correlation)) if r.correlation is not None else np.inf) for r in rows]
    for rank, i in enumerate(sorted(range(len(rows)), key=lambda i: (corr_key[i], i)), start=1):
        rows[i].rank_corr = rank
    for rank, i in enumerate(sorted(range(len(rows)), key=lambda i: (-rows[i].mutual_info, i)), start=1):
        rows[i].rank_mi = rank
    return AssociationReport(dataset_id or ds.name, rows)
