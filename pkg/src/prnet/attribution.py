"""DeepLIFT (Rescale rule) contributions of input loci and the importance ranking built from them."""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Dataset, LocusId
from .errors import ShapeError
from .network import ACTIVATIONS, MaskedNetwork, _check_loci

# Below this |z - z0| the Rescale multiplier is replaced by the derivative at z.
DELTA_GUARD = 1e-7


@dataclass
class ContributionMatrix:
    """Per-sample, per-locus contributions to ``f(x) - f(reference)``.

    ``heads`` holds the same decomposition for every head output separately
    (shape depth x n x m) when requested.
    """

    values: np.ndarray
    reference: np.ndarray
    delta: np.ndarray
    heads: np.ndarray | None = None
    head_delta: np.ndarray | None = None

    def summation_error(self) -> np.ndarray:
        """Relative summation-to-delta error per sample."""
        return np.abs(self.values.sum(axis=1) - self.delta) / (1.0 + np.abs(self.delta))


def _rescale(fn, dfn, z, z0):
    dz = z - z0
    out = fn(z)
    out0 = fn(z0)
    small = np.abs(dz) < DELTA_GUARD
    safe = np.where(small, 1.0, dz)
    mult = (out - out0) / safe
    if np.any(small):
        mult = np.where(small, dfn(z, out), mult)
    return mult


def _multipliers(net: MaskedNetwork, X, reference):
    """Rescale multipliers of every nonlinearity, for the samples and the reference."""
    zs, _, us, ps = net.trace(X)
    zs0, _, us0, ps0 = net.trace(reference[None, :])
    act, dact = ACTIVATIONS[net.activation]
    hact, dhact = ACTIVATIONS[net.head_activation]
    m_hidden = [_rescale(act, dact, z, z0) for z, z0 in zip(zs, zs0)]
    m_head = [_rescale(hact, dhact, u, u0) for u, u0 in zip(us, us0)]
    delta_heads = np.column_stack(ps) - np.column_stack(ps0)
    return m_hidden, m_head, delta_heads


def _backward(net, m_hidden, m_head, head_coef):
    """Multipliers of the inputs w.r.t. ``sum_k head_coef[k] * p_k`` (chain rule on multipliers)."""
    L = net.depth
    n = m_hidden[0].shape[0]
    g = np.zeros((n, net.layers[-1].shape[1]))
    for k in range(L - 1, -1, -1):
        if head_coef[k] != 0.0:
            g = g + (head_coef[k] * m_head[k])[:, None] * net.heads[k].w[None, :]
        g = net.layers[k].rmatmul(g * m_hidden[k])
    return g


def deeplift(net: MaskedNetwork, ds: Dataset, reference=None, per_head: bool = False) -> ContributionMatrix:
    """Rescale-rule contributions of each locus to the network output.

    Linear layers pass multipliers through their weights; each tanh/sigmoid
    uses ``(f(z) - f(z0)) / (z - z0)``. Contributions to the final output are
    the head-weighted sum of per-head contributions, so for every sample the
    row sum equals ``final(x) - final(reference)``.
    """
    _check_loci(net, ds)
    X = ds.X
    reference = np.zeros(net.input_width) if reference is None else np.asarray(reference, dtype=np.float64)
    if reference.shape != (net.input_width,):
        raise ShapeError(f"reference must have length {net.input_width}, got {reference.shape}")
    m_hidden, m_head, delta_heads = _multipliers(net, X, reference)
    dx = X - reference[None, :]
    values = _backward(net, m_hidden, m_head, net.head_weights) * dx
    heads = None
    if per_head:
        heads = np.stack([
            _backward(net, m_hidden, m_head, np.eye(net.depth)[k]) * dx for k in range(net.depth)
        ])
    return ContributionMatrix(
        values=values,
        reference=reference,
        delta=delta_heads @ net.head_weights,
        heads=heads,
        head_delta=delta_heads,
    )


@dataclass
class ImportanceRanking:
    """Loci sorted by descending score; ties keep the original locus order."""

    loci: tuple
    scores: np.ndarray
    source: str = ""

    def __post_init__(self):
        self.loci = tuple(LocusId(*l) for l in self.loci)
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if len(self.loci) != self.scores.size:
            raise ShapeError("loci and scores differ in length")
        if np.any(self.scores < 0):
            raise ValueError("importance scores must be non-negative")
        if np.any(np.diff(self.scores) > 0):
            raise ValueError("ranking is not sorted in descending order")

    def __len__(self):
        return len(self.loci)

    def __iter__(self):
        return iter(zip(self.loci, self.scores.tolist()))

    def score_of(self) -> dict:
        return dict(zip(self.loci, self.scores.tolist()))

    def rank_of(self) -> dict:
        return {l: i + 1 for i, l in enumerate(self.loci)}

    def digest(self) -> str:
        h = hashlib.sha256()
        for locus, score in self:
            h.update(f"{locus}\t{score!r}\n".encode())
        return h.hexdigest()

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["rank", "gene", "channel", "score"])
            for i, (locus, score) in enumerate(self, start=1):
                w.writerow([i, locus.gene, locus.channel, repr(score)])

    @classmethod
    def from_csv(cls, path) -> "ImportanceRanking":
        loci, scores = [], []
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                loci.append(LocusId(row["gene"], row["channel"]))
                scores.append(float(row["score"]))
        return cls(loci, scores, source=Path(path).name)


def rank_loci(loci, scores, source="") -> ImportanceRanking:
    scores = np.asarray(scores, dtype=np.float64)
    order = np.lexsort((np.arange(scores.size), -scores))
    return ImportanceRanking(tuple(loci[i] for i in order), scores[order], source)


def aggregate_importance(cm: ContributionMatrix, loci, how: str = "sum", source: str = "") -> ImportanceRanking:
    """Score each locus by the sum (or mean) over samples of its absolute contribution."""
    loci = tuple(loci)
    if cm.values.shape[1] != len(loci):
        raise ShapeError(f"{cm.values.shape[1]} contribution columns for {len(loci)} loci")
    absval = np.abs(cm.values)
    if how == "sum":
        scores = absval.sum(axis=0)
    elif how == "mean":
        scores = absval.mean(axis=0)
    else:
        raise ValueError(f"unknown aggregation {how!r}")
    return rank_loci(loci, scores, source)


def model_digest(net: MaskedNetwork) -> str:
    return hashlib.sha256(net.get_params().astype("<f8").tobytes()).hexdigest()[:16]


def importance_ranking(net: MaskedNetwork, ds: Dataset, reference=None, how="sum") -> ImportanceRanking:
    """DeepLIFT on ``ds`` followed by aggregation; the usual entry point."""
    cm = deeplift(net, ds, reference)
    return aggregate_importance(cm, ds.loci, how, source=model_digest(net))


def score_distribution(r: ImportanceRanking) -> dict:
    """Counts and fractions of scores in [0, 0], (0, 1] and (1, inf)."""
    s = r.scores
    zero = int(np.sum(s == 0))
    unit = int(np.sum((s > 0) & (s <= 1)))
    above = int(np.sum(s > 1))
    total = max(s.size, 1)
    return {
        "zero_count": zero,
        "unit_interval_count": unit,
        "above_one_count": above,
        "fractions": {"zero": zero / total, "unit_interval": unit / total, "above_one": above / total},
    }
