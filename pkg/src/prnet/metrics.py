"""Classification metrics shared by training, selection and evaluation."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import UndefinedMetricError

DEFAULT_THRESHOLD = 0.5


def _check(scores, y):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(y).ravel()
    if scores.shape != y.shape:
        raise ValueError(f"scores {scores.shape} and labels {y.shape} differ in length")
    return scores, y.astype(bool)


def auc(scores, y) -> float:
    """ROC AUC as the Mann-Whitney statistic; ties between classes count one half."""
    scores, y = _check(scores, y)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs at least one positive and one negative sample")
    ranks = rankdata(scores, method="average")
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass
class MetricSet:
    auc: float | None
    recall: float
    precision: float
    accuracy: float
    f1: float
    threshold: float
    tp: int
    fp: int
    tn: int
    fn: int

    def as_dict(self):
        return asdict(self)


def threshold_metrics(scores, y, threshold: float = DEFAULT_THRESHOLD) -> MetricSet:
    """Confusion-matrix metrics for ``score >= threshold`` predictions.

    Precision is reported as 0 when nothing is predicted positive. AUC is
    None when only one class is present.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    scores, y = _check(scores, y)
    pred = scores >= threshold
    tp = int(np.sum(pred & y))
    fp = int(np.sum(pred & ~y))
    fn = int(np.sum(~pred & y))
    tn = int(np.sum(~pred & ~y))
    if tp + fn == 0:
        raise UndefinedMetricError("recall needs at least one positive sample")
    recall = tp / (tp + fn)
    precision = tp / (tp + fp) if tp + fp else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    try:
        area = auc(scores, y)
    except UndefinedMetricError:
        area = None
    return MetricSet(
        auc=area,
        recall=recall,
        precision=precision,
        accuracy=(tp + tn) / y.size,
        f1=f1,
        threshold=threshold,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
    )


def recall(scores, y, threshold: float = DEFAULT_THRESHOLD) -> float:
    return threshold_metrics(scores, y, threshold).recall
