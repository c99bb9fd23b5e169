"""Gene -> pathway hierarchies and the sparse connectivity masks they induce.

Hierarchy JSON layout::

    {"genes": [...],
     "levels": [[pathway ids of level 0], [level 1], ...],
     "gene_edges": [[gene, level-0 pathway], ...],
     "pathway_edges": [[level_index, child, parent], ...]}

``level_index`` is the level of the child; the parent lives one level up.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .dataset import LocusId, gene_names, genes_of
from .errors import CoverageError, HierarchyError

RESIDUAL = "residual"

# Widths of the five pathway levels above the gene layer of the original
# network, as fractions of its 9,229 genes (1387, 1066, 447, 147, 26).
_REFERENCE_WIDTHS = (1387, 1066, 447, 147, 26)
_REFERENCE_GENES = 9229


def reference_levels(gene_count: int) -> list[int]:
    """Pathway layer widths scaled from the reference architecture to ``gene_count`` genes."""
    return [max(1, round(w * gene_count / _REFERENCE_GENES)) for w in _REFERENCE_WIDTHS]


@dataclass
class PathwayHierarchy:
    genes: tuple
    levels: tuple
    gene_edges: tuple
    pathway_edges: tuple
    unconnected_genes: tuple = field(default=(), compare=False)

    def __post_init__(self):
        self.genes = tuple(self.genes)
        self.levels = tuple(tuple(level) for level in self.levels)
        self.gene_edges = tuple(tuple(e) for e in self.gene_edges)
        self.pathway_edges = tuple((int(k), c, p) for k, c, p in self.pathway_edges)
        self._validate()

    def _validate(self):
        if not self.genes:
            raise HierarchyError("hierarchy has no genes")
        if len(set(self.genes)) != len(self.genes):
            raise HierarchyError("duplicate gene in hierarchy")
        if not self.levels:
            raise HierarchyError("hierarchy needs at least one pathway level")
        for k, level in enumerate(self.levels):
            if not level:
                raise HierarchyError(f"level {k} is empty")
            if len(set(level)) != len(level):
                raise HierarchyError(f"duplicate pathway id in level {k}")
        genes = set(self.genes)
        level0 = set(self.levels[0])
        for gene, pathway in self.gene_edges:
            if gene not in genes or pathway not in level0:
                raise HierarchyError(f"dangling gene edge {gene} -> {pathway}")
        level_sets = [set(level) for level in self.levels]
        for k, child, parent in self.pathway_edges:
            if not 0 <= k < len(self.levels) - 1:
                raise HierarchyError(f"edge {child} -> {parent} has invalid level index {k}")
            if child not in level_sets[k] or parent not in level_sets[k + 1]:
                raise HierarchyError(f"dangling pathway edge at level {k}: {child} -> {parent}")
            if child == parent:
                raise HierarchyError(f"self-loop on {child}")

    @property
    def depth(self) -> int:
        """Number of masked layers: locus -> gene plus one per pathway level."""
        return 1 + len(self.levels)

    @property
    def edge_count(self) -> int:
        return len(self.gene_edges) + len(self.pathway_edges)

    def edges_per_level(self) -> list[int]:
        counts = [len(self.gene_edges)] + [0] * (len(self.levels) - 1)
        for k, _, _ in self.pathway_edges:
            counts[k + 1] += 1
        return counts

    def to_json(self) -> dict:
        return {
            "genes": list(self.genes),
            "levels": [list(level) for level in self.levels],
            "gene_edges": [list(e) for e in self.gene_edges],
            "pathway_edges": [list(e) for e in self.pathway_edges],
        }

    def digest(self) -> str:
        if getattr(self, "_digest", None) is None:
            blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":")).encode()
            self._digest = hashlib.sha256(blob).hexdigest()
        return self._digest

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json()) + "\n", encoding="utf-8")


def attach_unconnected(h: PathwayHierarchy) -> PathwayHierarchy:
    """Route genes without any pathway edge through a chain of ``residual`` nodes."""
    connected = {g for g, _ in h.gene_edges}
    orphans = tuple(g for g in h.genes if g not in connected)
    if not orphans:
        return h
    warnings.warn(f"{len(orphans)} gene(s) without pathway edges attached to '{RESIDUAL}'", stacklevel=2)
    names = [f"{RESIDUAL}_{k}" for k in range(len(h.levels))]
    levels = [tuple(level) + (names[k],) for k, level in enumerate(h.levels)]
    gene_edges = list(h.gene_edges) + [(g, names[0]) for g in orphans]
    pathway_edges = list(h.pathway_edges) + [(k, names[k], names[k + 1]) for k in range(len(names) - 1)]
    return PathwayHierarchy(h.genes, levels, gene_edges, pathway_edges, unconnected_genes=orphans)


def load_hierarchy(path) -> PathwayHierarchy:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise HierarchyError(f"{path}: invalid JSON ({exc})") from None
    missing = [k for k in ("genes", "levels", "gene_edges") if k not in obj]
    if missing:
        raise HierarchyError(f"{path}: missing field(s) {missing}")
    h = PathwayHierarchy(
        obj["genes"], obj["levels"], obj["gene_edges"], obj.get("pathway_edges", [])
    )
    return attach_unconnected(h)


def generate_toy_hierarchy(
    gene_count: int,
    pathways_per_level: Sequence[int],
    fanin: int,
    seed: int,
    genes: Sequence[str] | None = None,
) -> PathwayHierarchy:
    """Random layered hierarchy where every node has ``min(fanin, width above)`` parents.

    Every pathway also receives at least one child, so all nodes have
    degree >= 1. Gene names default to ``dataset.gene_names(gene_count)``.
    """
    if not pathways_per_level:
        raise ValueError("pathways_per_level must be non-empty")
    if fanin < 1:
        raise ValueError("fanin must be >= 1")
    genes = list(genes) if genes is not None else gene_names(gene_count)
    if len(genes) != gene_count:
        raise ValueError("len(genes) != gene_count")
    levels = [[f"L{k + 1}_P{i:04d}" for i in range(width)] for k, width in enumerate(pathways_per_level)]
    rng = np.random.default_rng(seed)

    def connect(n_child, n_parent):
        per_child = min(fanin, n_parent)
        if n_child * per_child < n_parent:
            raise ValueError(
                f"{n_child} nodes with fanin {fanin} cannot cover {n_parent} parents"
            )
        chosen = [set() for _ in range(n_child)]
        children = rng.permutation(n_child)
        for j, p in enumerate(rng.permutation(n_parent)):
            chosen[children[j % n_child]].add(int(p))
        edges = []
        for c in range(n_child):
            need = per_child - len(chosen[c])
            if need > 0:
                pool = np.setdiff1d(np.arange(n_parent), sorted(chosen[c]))
                chosen[c].update(rng.choice(pool, size=need, replace=False).tolist())
            edges.extend((c, p) for p in sorted(chosen[c]))
        return edges

    gene_edges = [(genes[c], levels[0][p]) for c, p in connect(len(genes), len(levels[0]))]
    pathway_edges = []
    for k in range(len(levels) - 1):
        pathway_edges += [
            (k, levels[k][c], levels[k + 1][p]) for c, p in connect(len(levels[k]), len(levels[k + 1]))
        ]
    return PathwayHierarchy(genes, levels, gene_edges, pathway_edges)


@dataclass
class MaskStack:
    """Binary connectivity matrices ``M0 .. ML`` (CSR, float64 ones).

    ``nodes[0]`` is the locus list; ``nodes[k]`` names the columns of
    ``masks[k - 1]`` (genes, then pathways level by level).
    """

    masks: list
    nodes: list
    hierarchy_digest: str = ""

    @property
    def depth(self) -> int:
        return len(self.masks)

    @property
    def loci(self) -> tuple:
        return tuple(self.nodes[0])

    @property
    def widths(self) -> list[int]:
        return [len(n) for n in self.nodes]

    def nnz(self) -> list[int]:
        return [int(m.nnz) for m in self.masks]

    def dense(self, k) -> np.ndarray:
        return self.masks[k].toarray()

    def __eq__(self, other):
        if not isinstance(other, MaskStack):
            return NotImplemented
        return (
            [list(n) for n in self.nodes] == [list(n) for n in other.nodes]
            and all((a != b).nnz == 0 for a, b in zip(self.masks, other.masks))
        )


def _binary_csr(rows, cols, shape):
    data = np.ones(len(rows))
    m = sp.csr_matrix((data, (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))), shape=shape)
    m.sum_duplicates()
    m.data[:] = 1.0
    m.sort_indices()
    return m


def build_masks(h: PathwayHierarchy, locus_list: Sequence[LocusId]) -> MaskStack:
    """Compile the hierarchy into masks for the given input loci.

    Genes without any locus are dropped, and pathways left without any
    incoming edge are removed level by level, so a pruned locus list yields a
    strictly smaller network. Gene and pathway columns keep hierarchy order.
    """
    loci = [LocusId(*l) for l in locus_list]
    if not loci:
        raise CoverageError("empty locus list")
    known = set(h.genes)
    absent = [g for g in genes_of(loci) if g not in known]
    if absent:
        raise CoverageError(f"{len(absent)} genes absent from hierarchy: {', '.join(absent[:10])}", absent)

    wanted = {l.gene for l in loci}
    genes = [g for g in h.genes if g in wanted]
    gidx = {g: j for j, g in enumerate(genes)}
    masks = [_binary_csr(range(len(loci)), [gidx[l.gene] for l in loci], (len(loci), len(genes)))]
    nodes = [loci, genes]

    layer_edges = [h.gene_edges] + [[] for _ in range(len(h.levels) - 1)]
    for k, child, parent in h.pathway_edges:
        layer_edges[k + 1].append((child, parent))

    below = gidx
    for k, level in enumerate(h.levels):
        live = [(c, p) for c, p in layer_edges[k] if c in below]
        reached = {p for _, p in live}
        kept = [p for p in level if p in reached]
        if not kept:
            raise HierarchyError(f"no pathway in level {k} is reachable from the selected genes")
        pidx = {p: j for j, p in enumerate(kept)}
        masks.append(
            _binary_csr([below[c] for c, _ in live], [pidx[p] for _, p in live], (len(below), len(kept)))
        )
        nodes.append(kept)
        below = pidx
    return MaskStack(masks, nodes, hierarchy_digest=h.digest())
