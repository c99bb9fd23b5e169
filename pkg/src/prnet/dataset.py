"""Gene-alteration datasets: loading, synthesis, splitting and locus bookkeeping.

Every matrix handed to the rest of the package has one column per
``LocusId`` (gene, channel) laid out gene-major with channels ordered
``mutation, cnv_amp, cnv_del``.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConstraintViolation, CoverageError, DatasetError, ParseError

log = logging.getLogger(__name__)

CHANNELS = ("mutation", "cnv_amp", "cnv_del")
AMP_THRESHOLD = 2
DEL_THRESHOLD = -2

_POSITIVE_LABELS = {"crpc", "1", "metastatic", "positive"}
_NEGATIVE_LABELS = {"primary", "0", "negative"}


class LocusId(NamedTuple):
    gene: str
    channel: str

    def __str__(self):
        return f"{self.gene}({self.channel})"

    @classmethod
    def parse(cls, text: str) -> "LocusId":
        """Inverse of ``str(locus)``: ``"AR(cnv_amp)" -> LocusId("AR", "cnv_amp")``."""
        gene, _, rest = text.partition("(")
        if not rest.endswith(")"):
            raise ValueError(f"not a locus id: {text!r}")
        return cls(gene, rest[:-1])


def loci_for_genes(genes: Sequence[str], channels: Sequence[str] = CHANNELS) -> list[LocusId]:
    return [LocusId(g, c) for g in genes for c in channels]


def genes_of(loci: Sequence[LocusId]) -> list[str]:
    """Unique genes in first-appearance order."""
    return list(dict.fromkeys(l.gene for l in loci))


def _validate_loci(loci):
    seen = set()
    for locus in loci:
        if not isinstance(locus, LocusId):
            raise DatasetError(f"expected LocusId, got {locus!r}")
        if not locus.gene:
            raise DatasetError("empty gene symbol in locus list")
        if locus.channel not in CHANNELS:
            raise DatasetError(f"unknown channel {locus.channel!r} for gene {locus.gene}")
        if locus in seen:
            raise DatasetError(f"duplicate locus {locus}")
        seen.add(locus)


@dataclass(frozen=True, eq=False)
class Dataset:
    """n samples x m loci with binary labels (1 = CRPC, 0 = primary).

    Arrays are copied and frozen on construction.
    """

    sample_ids: tuple
    loci: tuple
    X: np.ndarray
    y: np.ndarray
    name: str = "dataset"

    def __post_init__(self):
        sample_ids = tuple(str(s) for s in self.sample_ids)
        loci = tuple(LocusId(*l) for l in self.loci)
        X = np.array(self.X, dtype=np.float64, copy=True)
        y = np.array(self.y, copy=True).astype(np.int8)
        if X.ndim != 2:
            raise DatasetError(f"X must be 2-D, got shape {X.shape}")
        if X.shape != (len(sample_ids), len(loci)):
            raise DatasetError(
                f"X shape {X.shape} does not match {len(sample_ids)} samples x {len(loci)} loci"
            )
        if y.shape != (len(sample_ids),):
            raise DatasetError(f"y has shape {y.shape}, expected ({len(sample_ids)},)")
        if not np.all(np.isfinite(X)):
            raise DatasetError("X contains missing or non-finite entries")
        if np.any((y != 0) & (y != 1)):
            raise DatasetError("labels must be 0/1")
        if len(set(sample_ids)) != len(sample_ids):
            raise DatasetError("duplicate sample ids")
        _validate_loci(loci)
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "sample_ids", sample_ids)
        object.__setattr__(self, "loci", loci)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return len(self.sample_ids)

    @property
    def m(self) -> int:
        return len(self.loci)

    @property
    def genes(self) -> list[str]:
        return genes_of(self.loci)

    @property
    def n_positive(self) -> int:
        return int(self.y.sum())

    @property
    def n_negative(self) -> int:
        return self.n - self.n_positive

    def require_both_classes(self, what="this operation"):
        if self.n_positive == 0 or self.n_negative == 0:
            raise DatasetError(
                f"{self.name}: {what} needs both classes "
                f"(positives={self.n_positive}, negatives={self.n_negative})"
            )

    def take(self, rows, name=None) -> "Dataset":
        rows = np.asarray(rows, dtype=np.intp)
        return Dataset(
            tuple(self.sample_ids[i] for i in rows),
            self.loci,
            self.X[rows],
            self.y[rows],
            name=name or self.name,
        )

    def with_name(self, name) -> "Dataset":
        return Dataset(self.sample_ids, self.loci, self.X, self.y, name=name)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.sample_ids == other.sample_ids
            and self.loci == other.loci
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
        )

    __hash__ = None

    def __repr__(self):
        return (
            f"Dataset(name={self.name!r}, n={self.n}, m={self.m}, "
            f"positives={self.n_positive})"
        )


# ---------------------------------------------------------------------------
# CSV loading


def _read_matrix_csv(path, allowed):
    """Read a samples x genes CSV. Returns (sample_ids, genes, {sample: {gene: int}})."""
    path = Path(path)
    rows = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(path, 1, "empty file, expected a header row") from None
        if len(header) < 2:
            raise ParseError(path, 1, "header needs a sample id column and at least one gene")
        genes = [g.strip() for g in header[1:]]
        if any(not g for g in genes):
            raise ParseError(path, 1, "empty gene name in header")
        if len(set(genes)) != len(genes):
            raise ParseError(path, 1, "duplicate gene in header")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(path, lineno, f"expected {len(header)} fields, got {len(row)}")
            sid = row[0].strip()
            if not sid:
                raise ParseError(path, lineno, "empty sample id")
            if sid in rows:
                raise DatasetError(f"{path}:{lineno}: duplicate sample id {sid!r}")
            values = {}
            for gene, cell in zip(genes, row[1:]):
                cell = cell.strip()
                if cell == "" or cell.lower() in ("na", "nan"):
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(path, lineno, f"non-numeric value {cell!r} for {gene}") from None
                if not math.isfinite(v) or v != int(v) or int(v) not in allowed:
                    raise ParseError(path, lineno, f"value {cell!r} for {gene} not in {sorted(allowed)}")
                values[gene] = int(v)
            rows[sid] = values
    return list(rows), genes, rows


def _read_labels_csv(path):
    path = Path(path)
    labels = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            next(reader)
        except StopIteration:
            raise ParseError(path, 1, "empty labels file") from None
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ParseError(path, lineno, f"expected 2 fields (sample_id,response), got {len(row)}")
            sid, response = row[0].strip(), row[1].strip().lower()
            if sid in labels:
                raise DatasetError(f"{path}:{lineno}: duplicate sample id {sid!r}")
            if response in _POSITIVE_LABELS:
                labels[sid] = 1
            elif response in _NEGATIVE_LABELS:
                labels[sid] = 0
            elif response == "":
                continue
            else:
                raise ParseError(path, lineno, f"unknown response {row[1]!r}")
    return labels


def load_dataset(mutation_file, cna_file, labels_file, name=None) -> Dataset:
    """Join a mutation matrix, a CNA matrix and a labels file into one Dataset.

    CNA cells follow the GISTIC convention: ``>= 2`` sets ``cnv_amp`` and
    ``<= -2`` sets ``cnv_del``. Blank cells and samples present in only one
    matrix are imputed with zeros. Samples without a label are dropped.
    """
    mut_ids, mut_genes, mut = _read_matrix_csv(mutation_file, {0, 1})
    cna_ids, cna_genes, cna = _read_matrix_csv(cna_file, {-2, -1, 0, 1, 2})
    labels = _read_labels_csv(labels_file)

    genes = list(dict.fromkeys(mut_genes + cna_genes))
    candidates = list(dict.fromkeys(mut_ids + cna_ids))
    sample_ids = [s for s in candidates if s in labels]
    dropped = len(candidates) - len(sample_ids)
    if dropped:
        warnings.warn(f"dropped {dropped} samples without a response label", stacklevel=2)
    if not sample_ids:
        raise DatasetError("no labelled samples after joining mutation, CNA and label files")

    loci = loci_for_genes(genes)
    col = {g: 3 * j for j, g in enumerate(genes)}
    X = np.zeros((len(sample_ids), len(loci)))
    for i, sid in enumerate(sample_ids):
        for gene, v in mut.get(sid, {}).items():
            X[i, col[gene]] = v
        for gene, v in cna.get(sid, {}).items():
            if v >= AMP_THRESHOLD:
                X[i, col[gene] + 1] = 1.0
            elif v <= DEL_THRESHOLD:
                X[i, col[gene] + 2] = 1.0
    y = np.array([labels[s] for s in sample_ids])
    if name is None:
        name = Path(mutation_file).stem
    return Dataset(tuple(sample_ids), tuple(loci), X, y, name=name)


def save_dataset_csv(ds: Dataset, out_dir, prefix=None) -> dict:
    """Write ``ds`` as the mutation / CNA / labels CSV trio read by ``load_dataset``.

    Only binary datasets carrying all three channels per gene can be written;
    a sample with both ``cnv_amp`` and ``cnv_del`` set cannot be encoded.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    prefix = prefix or ds.name
    genes = ds.genes
    if list(ds.loci) != loci_for_genes(genes):
        raise DatasetError("CSV export needs all three channels per gene in canonical order")
    if not np.all((ds.X == 0) | (ds.X == 1)):
        raise DatasetError("CSV export needs a binary matrix")
    cube = ds.X.reshape(ds.n, len(genes), 3).astype(np.int64)
    if np.any(cube[:, :, 1] & cube[:, :, 2]):
        raise DatasetError("sample with simultaneous amplification and deletion")
    cna = 2 * cube[:, :, 1] - 2 * cube[:, :, 2]

    paths = {
        "mutation": out_dir / f"{prefix}_mutation.csv",
        "cna": out_dir / f"{prefix}_cna.csv",
        "labels": out_dir / f"{prefix}_labels.csv",
    }
    for key, mat in (("mutation", cube[:, :, 0]), ("cna", cna)):
        with open(paths[key], "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sample_id", *genes])
            for sid, row in zip(ds.sample_ids, mat):
                w.writerow([sid, *row.tolist()])
    with open(paths["labels"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "response"])
        for sid, label in zip(ds.sample_ids, ds.y):
            w.writerow([sid, "CRPC" if label else "primary"])
    return paths


# ---------------------------------------------------------------------------
# splitting


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def split(ds: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Stratified train/test split.

    Each class contributes ``round(class_count * test_fraction)`` samples to
    the test side. Row order inside each side follows the original order.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    if ds.n < 4:
        raise DatasetError(f"need at least 4 samples to split, got {ds.n}")
    ds.require_both_classes("split")
    rng = np.random.default_rng(seed)
    test_rows = []
    for label in (1, 0):
        idx = np.flatnonzero(ds.y == label)
        if idx.size < 2:
            raise DatasetError(f"class {label} has {idx.size} sample(s); stratification needs >= 2")
        k = _round_half_up(idx.size * test_fraction)
        k = min(max(k, 1), idx.size - 1)
        test_rows.append(rng.permutation(idx)[:k])
    test_mask = np.zeros(ds.n, dtype=bool)
    test_mask[np.concatenate(test_rows)] = True
    train = ds.take(np.flatnonzero(~test_mask), name=f"{ds.name}/train")
    test = ds.take(np.flatnonzero(test_mask), name=f"{ds.name}/test")
    return train, test


def subsample(ds: Dataset, size: int, seed: int) -> Dataset:
    """Stratified random subset of exactly ``size`` rows (largest-remainder allocation)."""
    if not 0 < size <= ds.n:
        raise DatasetError(f"cannot draw {size} samples from {ds.n}")
    if size == ds.n:
        return ds
    rng = np.random.default_rng(seed)
    groups = [np.flatnonzero(ds.y == label) for label in (1, 0)]
    quotas = [g.size * size / ds.n for g in groups]
    counts = [int(math.floor(q)) for q in quotas]
    order = sorted(range(2), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[: size - sum(counts)]:
        counts[i] += 1
    rows = np.concatenate([rng.permutation(g)[:c] for g, c in zip(groups, counts)])
    return ds.take(np.sort(rows), name=f"{ds.name}[{size}]")


# ---------------------------------------------------------------------------
# locus-space transforms


def expand_to_universe(ds: Dataset, universe: Sequence[LocusId]) -> Dataset:
    """Re-index ``ds`` onto ``universe``; loci absent from ``ds`` become zero columns."""
    universe = [LocusId(*u) for u in universe]
    if len(set(universe)) != len(universe):
        raise CoverageError("universe contains duplicate loci")
    pos = {u: j for j, u in enumerate(universe)}
    outside = [l for l in ds.loci if l not in pos]
    if outside:
        raise CoverageError(
            f"{len(outside)} loci of {ds.name} are outside the universe: "
            + ", ".join(map(str, outside[:10])),
            offenders=outside,
        )
    X = np.zeros((ds.n, len(universe)))
    X[:, [pos[l] for l in ds.loci]] = ds.X
    return Dataset(ds.sample_ids, tuple(universe), X, ds.y, name=ds.name)


@dataclass
class ConstraintReport:
    """Outcome of checking that a selected locus set is contained in a dataset's loci."""

    g0_size: int
    g1_size: int
    cardinality_ok: bool
    subset_ok: bool
    missing: list = field(default_factory=list)
    tolerance: float = 0.0

    @property
    def missing_fraction(self) -> float:
        return len(self.missing) / self.g1_size if self.g1_size else 0.0

    @property
    def passed(self) -> bool:
        return self.cardinality_ok and self.subset_ok

    @property
    def acceptable(self) -> bool:
        """True when the set either passes or misses no more than ``tolerance`` of G1."""
        return self.passed or self.missing_fraction <= self.tolerance

    def raise_if_unacceptable(self):
        if not self.acceptable:
            raise ConstraintViolation(self.missing)

    def __str__(self):
        return (
            f"|G0|={self.g0_size} >= |G1|={self.g1_size}: {self.cardinality_ok}; "
            f"G1 subset of G0: {self.subset_ok}"
            + (f"; missing {', '.join(map(str, self.missing))}" if self.missing else "")
        )


def check_constraints(g0, g1, tolerance: float = 0.0) -> ConstraintReport:
    """Check ``|G0| >= |G1|`` and ``G1 ⊆ G0``.

    ``tolerance`` is the fraction of G1 that may be missing before the report
    is unacceptable; missing loci inside the tolerance are zero-filled by
    ``restrict_to_loci``.
    """
    g0_set = set(g0)
    g1 = list(g1)
    missing = [l for l in g1 if l not in g0_set]
    return ConstraintReport(
        g0_size=len(g0_set),
        g1_size=len(set(g1)),
        cardinality_ok=len(g0_set) >= len(set(g1)),
        subset_ok=not missing,
        missing=missing,
        tolerance=tolerance,
    )


def restrict_to_loci(ds: Dataset, g1: Sequence[LocusId], tolerance: float = 0.0) -> Dataset:
    """Keep exactly the ``g1`` columns in ``g1`` order.

    Raises ConstraintViolation naming the missing loci unless the missing
    fraction is within ``tolerance``, in which case they are zero-filled
    with a warning.
    """
    g1 = [LocusId(*l) for l in g1]
    report = check_constraints(ds.loci, g1, tolerance)
    report.raise_if_unacceptable()
    if report.missing:
        warnings.warn(f"zero-filling {len(report.missing)} missing loci: {report}", stacklevel=2)
    pos = {l: j for j, l in enumerate(ds.loci)}
    X = np.zeros((ds.n, len(g1)))
    for k, locus in enumerate(g1):
        j = pos.get(locus)
        if j is not None:
            X[:, k] = ds.X[:, j]
    return Dataset(ds.sample_ids, tuple(g1), X, ds.y, name=ds.name)


# ---------------------------------------------------------------------------
# synthetic data


CHANNEL_WEIGHTS = (1.0, 0.5, 0.5)


@dataclass
class SyntheticTruth:
    """Ground truth behind a synthetic dataset.

    ``offset`` and ``noise_scale`` make the labelling rule reusable for the
    shifted datasets drawn by ``generate_shifted_family``.
    """

    planted_genes: tuple
    effect_sizes: dict
    genes: tuple = ()
    mutation_freq: tuple = ()
    amp_freq: tuple = ()
    del_freq: tuple = ()
    offset: float = 0.0
    noise_scale: float = 0.0
    seed: int = 0

    def coefficients(self, loci) -> np.ndarray:
        coef = np.zeros(len(loci))
        for j, locus in enumerate(loci):
            beta = self.effect_sizes.get(locus.gene)
            if beta is not None:
                coef[j] = beta * CHANNEL_WEIGHTS[CHANNELS.index(locus.channel)]
        return coef

    def to_json(self) -> dict:
        return {
            "planted_genes": list(self.planted_genes),
            "effect_sizes": {g: float(b) for g, b in self.effect_sizes.items()},
            "genes": list(self.genes),
            "mutation_freq": [float(v) for v in self.mutation_freq],
            "amp_freq": [float(v) for v in self.amp_freq],
            "del_freq": [float(v) for v in self.del_freq],
            "offset": float(self.offset),
            "noise_scale": float(self.noise_scale),
            "seed": int(self.seed),
        }

    @classmethod
    def from_json(cls, obj) -> "SyntheticTruth":
        return cls(
            planted_genes=tuple(obj["planted_genes"]),
            effect_sizes=dict(obj["effect_sizes"]),
            genes=tuple(obj.get("genes", ())),
            mutation_freq=tuple(obj.get("mutation_freq", ())),
            amp_freq=tuple(obj.get("amp_freq", ())),
            del_freq=tuple(obj.get("del_freq", ())),
            offset=obj.get("offset", 0.0),
            noise_scale=obj.get("noise_scale", 0.0),
            seed=obj.get("seed", 0),
        )

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "SyntheticTruth":
        return cls.from_json(json.loads(Path(path).read_text()))


def _draw_alterations(rng, n, mut_p, amp_p, del_p):
    """Binary (n, genes, 3) cube; amplification and deletion are mutually exclusive."""
    g = len(mut_p)
    cube = np.zeros((n, g, 3))
    cube[:, :, 0] = rng.random((n, g)) < mut_p
    u = rng.random((n, g))
    cube[:, :, 1] = u < amp_p
    cube[:, :, 2] = (u >= amp_p) & (u < amp_p + del_p)
    return cube


def _label(rng, X, coef, offset, noise_scale):
    logit = X @ coef - offset
    if noise_scale > 0:
        logit = logit + noise_scale * rng.standard_normal(X.shape[0])
    prob = 1.0 / (1.0 + np.exp(-logit))
    return (prob > 0.5).astype(np.int8)


def gene_names(count, prefix="G"):
    width = max(4, len(str(count)))
    return [f"{prefix}{i:0{width}d}" for i in range(1, count + 1)]


def generate_synthetic(
    n: int,
    gene_count: int,
    planted: int,
    noise: float,
    seed: int,
    effect_scale: float = 1.0,
    name: str = "synthetic",
    max_attempts: int = 10,
) -> tuple[Dataset, SyntheticTruth]:
    """Draw a Bernoulli alteration matrix whose labels depend on ``planted`` genes only.

    Planted gene g carries effect ``beta_g ~ U(1, 2) * effect_scale`` applied
    to its (mutation, cnv_amp, cnv_del) columns with weights (1, 0.5, 0.5).
    The label is ``sigmoid(score - offset + noise * std(score) * eps) > 0.5``
    with ``offset = mean(score) + 0.5 * std(score)``, which puts roughly a
    third of the samples in the positive class.
    """
    if not 0 < planted <= gene_count:
        raise ValueError(f"need 0 < planted <= gene_count, got planted={planted}, gene_count={gene_count}")
    if n < 20:
        raise ValueError(f"n must be >= 20, got {n}")
    if noise < 0:
        raise ValueError("noise must be non-negative")

    genes = gene_names(gene_count)
    loci = loci_for_genes(genes)
    for attempt in range(max_attempts):
        rng = np.random.default_rng([seed, attempt])
        mut_p = rng.uniform(0.02, 0.2, gene_count)
        amp_p = rng.uniform(0.01, 0.08, gene_count)
        del_p = rng.uniform(0.01, 0.08, gene_count)
        planted_idx = np.sort(rng.choice(gene_count, size=planted, replace=False))
        mut_p[planted_idx] = rng.uniform(0.1, 0.3, planted)
        betas = rng.uniform(1.0, 2.0, planted) * effect_scale

        X = _draw_alterations(rng, n, mut_p, amp_p, del_p).reshape(n, -1)
        effect_sizes = {genes[i]: float(b) for i, b in zip(planted_idx, betas)}
        truth = SyntheticTruth(
            planted_genes=tuple(genes[i] for i in planted_idx),
            effect_sizes=effect_sizes,
            genes=tuple(genes),
            mutation_freq=tuple(mut_p),
            amp_freq=tuple(amp_p),
            del_freq=tuple(del_p),
            seed=seed,
        )
        score = X @ truth.coefficients(loci)
        sd = float(score.std())
        truth.offset = float(score.mean() + 0.5 * sd)
        truth.noise_scale = float(noise * sd)
        y = _label(rng, X, truth.coefficients(loci), truth.offset, truth.noise_scale)
        if 0 < y.sum() < n:
            sample_ids = tuple(f"{name}_S{i:05d}" for i in range(n))
            return Dataset(sample_ids, tuple(loci), X, y, name=name), truth
        log.info("synthetic draw %d was single-class, retrying", attempt)
    raise DatasetError(f"synthetic generator produced a single class {max_attempts} times")


def generate_shifted_family(
    truth: SyntheticTruth,
    count: int,
    n: int,
    seed: int,
    panel_fraction: float = 0.5,
    frequency_shift: float = 0.5,
    name: str = "shifted",
    required_genes: Sequence[str] = (),
) -> list[Dataset]:
    """Datasets sharing ``truth``'s labelling rule under covariate shift.

    Each dataset observes a random gene panel (all planted genes and
    ``required_genes`` plus ``panel_fraction`` of the rest, like a targeted
    sequencing panel) and redraws alteration frequencies as
    ``p * exp(frequency_shift * eps)``.
    """
    if not truth.genes:
        raise ValueError("truth carries no generator state; use generate_synthetic's truth")
    genes = list(truth.genes)
    planted = set(truth.planted_genes) | set(required_genes)
    unknown = set(required_genes) - set(genes)
    if unknown:
        raise ValueError(f"required genes not in the generator's universe: {sorted(unknown)}")
    base = np.array(truth.mutation_freq), np.array(truth.amp_freq), np.array(truth.del_freq)
    out = []
    for k in range(count):
        rng = np.random.default_rng([seed, k])
        others = [i for i, g in enumerate(genes) if g not in planted]
        keep_n = int(round(panel_fraction * len(others)))
        kept = set(rng.choice(others, size=keep_n, replace=False).tolist()) if keep_n else set()
        panel = [i for i, g in enumerate(genes) if g in planted or i in kept]
        probs = [np.clip(p[panel] * np.exp(frequency_shift * rng.standard_normal(len(panel))), 0.0, 0.45)
                 for p in base]
        cube = _draw_alterations(rng, n, *probs)
        panel_genes = [genes[i] for i in panel]
        loci = loci_for_genes(panel_genes)
        X = cube.reshape(n, -1)
        y = _label(rng, X, truth.coefficients(loci), truth.offset, truth.noise_scale)
        dname = f"{name}{k + 1}"
        ds = Dataset(tuple(f"{dname}_S{i:05d}" for i in range(n)), tuple(loci), X, y, name=dname)
        ds.require_both_classes("a shifted dataset")
        out.append(ds)
    return out
