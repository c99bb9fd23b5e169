"""Cross-dataset generalization grid, timing benchmark, and report files."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import svg
from .baselines import BaselineKind, predict_baseline, train_baseline
from .dataset import Dataset, LocusId, expand_to_universe, restrict_to_loci, subsample
from .errors import PRNetError
from .metrics import MetricSet, auc, threshold_metrics
from .network import TrainConfig, init_network, predict, train
from .pathway import PathwayHierarchy, build_masks
from .pruning import SelectionResult, assemble_prnet

log = logging.getLogger(__name__)

__all__ = [
    "auc",
    "threshold_metrics",
    "MetricSet",
    "ModelSpec",
    "baseline_spec",
    "pnet_spec",
    "prnet_spec",
    "standard_models",
    "GridCell",
    "GeneralizationGrid",
    "generalization_run",
    "scaled_sizes",
    "TimingReport",
    "timing_benchmark",
    "emit_reports",
    "METRIC_NAMES",
]

METRIC_NAMES = ("auc", "recall", "precision", "accuracy", "f1")
MODES = ("universe", "restricted")


@dataclass
class ModelSpec:
    """How to fit and score one model family.

    ``prepare`` maps a dataset onto the model's input loci; it runs outside
    any timed region, like data loading. ``fit(ds, seed)`` returns a fitted
    object and ``predict(fitted, ds)`` returns scores in [0, 1].
    """

    name: str
    fit: Callable
    predict: Callable
    prepare: Callable = None

    def __post_init__(self):
        if self.prepare is None:
            self.prepare = _identity


def _identity(ds):
    return ds


def baseline_spec(kind, params: dict | None = None, name: str | None = None) -> ModelSpec:
    kind = BaselineKind(kind)
    return ModelSpec(
        name or kind.value,
        lambda ds, seed: train_baseline(kind, ds, params, seed),
        predict_baseline,
    )


def pnet_spec(hierarchy: PathwayHierarchy, train_cfg: TrainConfig, name: str = "P-NET") -> ModelSpec:
    def fit(ds, seed):
        net = init_network(build_masks(hierarchy, ds.loci), seed)
        return train(net, ds, train_cfg.replace(seed=seed))[0]

    return ModelSpec(name, fit, predict)


def prnet_spec(hierarchy: PathwayHierarchy, train_cfg: TrainConfig, g1: Sequence[LocusId],
               tolerance: float = 0.0, name: str = "PR-NET") -> ModelSpec:
    g1 = tuple(LocusId(*l) for l in g1)

    def fit(ds, seed):
        return assemble_prnet(ds, g1, hierarchy, train_cfg, seed=seed, tolerance=tolerance)

    return ModelSpec(name, fit, lambda model, ds: model.predict(ds),
                     lambda ds: restrict_to_loci(ds, g1, tolerance))


def standard_models(hierarchy: PathwayHierarchy, train_cfg: TrainConfig, g1,
                    baseline_params: dict | None = None) -> list[ModelSpec]:
    """P-NET, PR-NET and the five classical baselines, in report order."""
    baseline_params = baseline_params or {}
    specs = [pnet_spec(hierarchy, train_cfg), prnet_spec(hierarchy, train_cfg, g1)]
    for kind in BaselineKind:
        specs.append(baseline_spec(kind, baseline_params.get(kind.value)))
    return specs


def scaled_sizes(sizes: Sequence[int], reference_n: int, n: int) -> list[int]:
    """Rescale training sizes chosen for a ``reference_n``-sample cohort to ``n`` samples."""
    out = [max(4, int(math.floor(s * n / reference_n + 0.5))) for s in sizes]
    if any(s > n for s in out):
        raise ValueError(f"scaled sizes {out} exceed n={n}")
    return out


@dataclass
class GridCell:
    model: str
    train_size: int
    eval_dataset: str
    metrics: MetricSet | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.metrics is not None


@dataclass
class GeneralizationGrid:
    mode: str
    models: list
    train_sizes: list
    eval_names: list
    cells: list = field(default_factory=list)
    seed: int = 0

    def cell(self, model, size, eval_name) -> GridCell:
        for c in self.cells:
            if (c.model, c.train_size, c.eval_dataset) == (model, size, eval_name):
                return c
        raise KeyError((model, size, eval_name))

    def is_complete(self) -> bool:
        want = {(m, s, e) for m in self.models for s in self.train_sizes for e in self.eval_names}
        have = {(c.model, c.train_size, c.eval_dataset) for c in self.cells}
        return want == have and all(c.ok or c.error for c in self.cells)

    def errors(self) -> list:
        return [c for c in self.cells if not c.ok]

    def mean(self, model: str, metric: str = "recall", size: int | None = None) -> float | None:
        """Mean of ``metric`` over the model's successful cells (optionally one size)."""
        vals = [getattr(c.metrics, metric) for c in self.cells
                if c.model == model and c.ok and (size is None or c.train_size == size)]
        vals = [v for v in vals if v is not None]
        return float(np.mean(vals)) if vals else None

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["mode", "model", "train_size", "eval_dataset", *METRIC_NAMES,
                        "tp", "fp", "tn", "fn", "error"])
            for c in self.cells:
                if c.ok:
                    m = c.metrics
                    vals = [_num(getattr(m, k)) for k in METRIC_NAMES] + [m.tp, m.fp, m.tn, m.fn, ""]
                else:
                    vals = [""] * (len(METRIC_NAMES) + 4) + [c.error]
                w.writerow([self.mode, c.model, c.train_size, c.eval_dataset, *vals])


def _num(v):
    return "" if v is None else repr(float(v))


def _size_seed(seed, size):
    return int(np.random.SeedSequence([seed, size]).generate_state(1)[0])


def generalization_run(
    models: Sequence[ModelSpec],
    train_ds: Dataset,
    train_sizes: Sequence[int],
    eval_datasets: Sequence[Dataset],
    universe: Sequence[LocusId] | None = None,
    seed: int = 0,
    mode: str = "universe",
    g1: Sequence[LocusId] | None = None,
    tolerance: float = 0.0,
) -> GeneralizationGrid:
    """Train every model on stratified subsamples of ``train_ds`` and score every eval set.

    ``mode="universe"`` expands the training data and each eval set onto
    ``universe`` (default: the training loci), zero-filling absent loci.
    ``mode="restricted"`` restricts everything to ``g1`` first. A failing
    expansion, restriction, fit or prediction is written into the affected
    cells and the run carries on.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if not models or not train_sizes or not eval_datasets:
        raise ValueError("models, train_sizes and eval_datasets must all be non-empty")
    if any(s > train_ds.n for s in train_sizes):
        raise ValueError(f"a training size exceeds n={train_ds.n}")
    names = [m.name for m in models]
    if len(set(names)) != len(names):
        raise ValueError(f"model names must be unique: {names}")

    if mode == "universe":
        universe = tuple(train_ds.loci) if universe is None else tuple(universe)
        adapt = lambda ds: expand_to_universe(ds, universe)  # noqa: E731
    else:
        if not g1:
            raise ValueError("restricted mode needs g1")
        g1 = tuple(LocusId(*l) for l in g1)
        adapt = lambda ds: restrict_to_loci(ds, g1, tolerance)  # noqa: E731

    source = adapt(train_ds)
    eval_names = [d.name for d in eval_datasets]
    if len(set(eval_names)) != len(eval_names):
        raise ValueError(f"eval dataset names must be unique: {eval_names}")
    adapted: dict[str, Dataset | str] = {}
    for ds in eval_datasets:
        try:
            adapted[ds.name] = adapt(ds)
        except PRNetError as exc:
            adapted[ds.name] = f"{type(exc).__name__}: {exc}"

    grid = GeneralizationGrid(mode, names, list(train_sizes), eval_names, seed=seed)
    for size in train_sizes:
        s_seed = _size_seed(seed, size)
        sub = subsample(source, size, s_seed)
        for spec in models:
            try:
                fitted = spec.fit(spec.prepare(sub), s_seed)
                fit_error = None
            except (PRNetError, ValueError) as exc:
                fitted, fit_error = None, f"fit failed: {type(exc).__name__}: {exc}"
            for name in eval_names:
                cell = GridCell(spec.name, size, name)
                target = adapted[name]
                if fit_error:
                    cell.error = fit_error
                elif isinstance(target, str):
                    cell.error = target
                else:
                    try:
                        x = spec.prepare(target)
                        cell.metrics = threshold_metrics(spec.predict(fitted, x), x.y)
                    except PRNetError as exc:
                        cell.error = f"{type(exc).__name__}: {exc}"
                if cell.error:
                    log.warning("%s / %d / %s: %s", spec.name, size, name, cell.error)
                grid.cells.append(cell)
    return grid


@dataclass
class TimingReport:
    """Per-model train and inference wall times over ``repetitions`` runs."""

    repetitions: int
    train_times: dict
    inference_times: dict

    @staticmethod
    def _stats(times):
        t = np.asarray(times, dtype=np.float64)
        var = float(t.var(ddof=1))
        return float(t.mean()), var, math.sqrt(var)

    def rows(self) -> list:
        """(phase, model, mean, variance, std) in model order, training first."""
        out = []
        for phase, table in (("train", self.train_times), ("inference", self.inference_times)):
            for model, times in table.items():
                out.append((phase, model, *self._stats(times)))
        return out

    def mean(self, phase: str, model: str) -> float:
        table = self.train_times if phase == "train" else self.inference_times
        return float(np.mean(table[model]))

    def speedup(self, phase: str, baseline: str, candidate: str) -> float:
        return self.mean(phase, baseline) / self.mean(phase, candidate)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["phase", "model", "mean_s", "variance", "std", "repetitions"])
            for phase, model, mean, var, std in self.rows():
                w.writerow([phase, model, f"{mean:.6f}", f"{var:.6e}", f"{std:.6e}", self.repetitions])

    def raw(self) -> dict:
        return {"repetitions": self.repetitions, "train": self.train_times, "inference": self.inference_times}


def timing_benchmark(model_builders: Sequence[ModelSpec], ds: Dataset, repetitions: int = 5,
                     seed: int = 0) -> TimingReport:
    """Time fit and predict for each model on the same data with the same seeds.

    Each repetition builds a fresh model (initialisation is inside the
    timed fit). Models run strictly one after another on a monotonic clock.
    """
    if repetitions < 2:
        raise ValueError("repetitions must be >= 2 to estimate a variance")
    train_times: dict[str, list] = {}
    infer_times: dict[str, list] = {}
    for spec in model_builders:
        data = spec.prepare(ds)
        train_times[spec.name], infer_times[spec.name] = [], []
        for rep in range(repetitions):
            rep_seed = _size_seed(seed, rep)
            t0 = time.perf_counter()
            fitted = spec.fit(data, rep_seed)
            t1 = time.perf_counter()
            spec.predict(fitted, data)
            t2 = time.perf_counter()
            train_times[spec.name].append(t1 - t0)
            infer_times[spec.name].append(t2 - t1)
        log.info("%s: train %.3fs, inference %.4fs (mean of %d)", spec.name,
                 np.mean(train_times[spec.name]), np.mean(infer_times[spec.name]), repetitions)
    return TimingReport(repetitions, train_times, infer_times)


def _write_metrics_csv(path, metrics: dict):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", *METRIC_NAMES, "threshold", "tp", "fp", "tn", "fn"])
        for name, m in metrics.items():
            w.writerow([name, *[_num(getattr(m, k)) for k in METRIC_NAMES], repr(m.threshold),
                        m.tp, m.fp, m.tn, m.fn])


def _grid_chart(grid: GeneralizationGrid, metric: str) -> str:
    values = [[grid.mean(model, metric, size) for model in grid.models] for size in grid.train_sizes]
    return svg.grouped_bar_chart(grid.train_sizes, grid.models, values,
                                 f"Mean {metric} across evaluation sets ({grid.mode})", metric)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def emit_reports(out_dir, grid: GeneralizationGrid | None = None, metrics: dict | None = None,
                 timing: TimingReport | None = None, selection: SelectionResult | None = None,
                 manifest: dict | None = None) -> dict:
    """Write whichever tables are given, their charts, and ``manifest.json``.

    Output is byte-stable for identical inputs. Timing tables are the one
    exception: they hold wall-clock measurements, and their raw
    per-repetition times are kept in the manifest.
    """
    if grid is None and metrics is None and timing is None and selection is None:
        raise ValueError("nothing to report")
    if grid is not None and not grid.cells:
        raise ValueError("the generalization grid is empty")
    if metrics is not None and not metrics:
        raise ValueError("the metrics table is empty")
    out_dir = Path(out_dir)
    plots = out_dir / "plots"
    try:
        plots.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {plots}: {exc}") from exc

    written: dict[str, Path] = {}

    def put(key, path, text):
        path.write_text(text, encoding="utf-8")
        written[key] = path

    if metrics is not None:
        written["metrics"] = out_dir / "metrics.csv"
        _write_metrics_csv(written["metrics"], metrics)
        models = list(metrics)
        values = [[getattr(metrics[m], k) for m in models] for k in ("auc", "recall")]
        put("metrics_plot", plots / "metrics.svg",
            svg.grouped_bar_chart(["auc", "recall"], models, values, "Held-out metrics", "value"))
    if grid is not None:
        written["grid"] = out_dir / "grid.csv"
        grid.to_csv(written["grid"])
        for metric in ("recall", "auc"):
            put(f"grid_{metric}_plot", plots / f"grid_{metric}.svg", _grid_chart(grid, metric))
    if timing is not None:
        written["timing"] = out_dir / "timing.csv"
        timing.to_csv(written["timing"])
        models = list(timing.train_times)
        values = [[timing.mean(phase, m) for m in models] for phase in ("train", "inference")]
        put("timing_plot", plots / "timing.svg",
            svg.grouped_bar_chart(["train", "inference"], models, values, "Mean wall time", "seconds"))
    if selection is not None:
        paths = selection.write(out_dir)
        written["selection_curve"] = paths["curve"]
        written["g1"] = paths["g1"]
        put("selection_plot", plots / "selection_curve.svg",
            svg.line_chart([p.size for p in selection.curve], [p.mean for p in selection.curve],
                           f"Mean {selection.metric} by candidate size", "genes kept",
                           f"mean {selection.metric}", errors=[p.std for p in selection.curve]))

    body = dict(manifest or {})
    if timing is not None:
        body["timing_raw"] = timing.raw()
    body["outputs"] = {k: {"file": str(p.relative_to(out_dir)), "sha256": file_digest(p)}
                       for k, p in sorted(written.items())}
    put("manifest", out_dir / "manifest.json", json.dumps(body, indent=2, sort_keys=True) + "\n")
    return written
