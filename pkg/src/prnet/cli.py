"""``prnet`` command line: one subcommand per pipeline stage, driven by a JSON config.

Exit codes: 0 success, 1 invalid invocation or configuration, 2 failure
while running. Every run writes ``manifest.json`` into its output directory
and nothing outside it.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import subprocess
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import association_report, compare_rankings
from .attribution import ImportanceRanking, importance_ranking
from .config import (
    SHIFT_DEFAULTS,
    SYNTH_DEFAULTS,
    TOY_DEFAULTS,
    TRAIN_SIZES_REFERENCE,
    TRAIN_SIZES_REFERENCE_N,
    ConfigError,
    RunConfig,
    load_config,
)
from .dataset import (
    generate_shifted_family,
    generate_synthetic,
    load_dataset,
    save_dataset_csv,
    split,
)
from .errors import ConstraintViolation, DatasetError, ParseError, PRNetError
from .evaluation import (
    emit_reports,
    file_digest,
    generalization_run,
    pnet_spec,
    prnet_spec,
    scaled_sizes,
    standard_models,
    timing_benchmark,
)
from .metrics import threshold_metrics
from .network import count_params, load_model, predict, save_model
from .pathway import generate_toy_hierarchy, load_hierarchy, reference_levels
from .pipeline import run_pipeline, train_full
from .pruning import gene_rollup, filter_nonzero, load_g1

log = logging.getLogger("prnet")

COMMANDS = {
    "synth": "generate a synthetic cohort with planted genes",
    "train": "train the full pathway-masked network",
    "attribute": "rank input loci by DeepLIFT importance",
    "prune": "train, rank, sweep candidate sizes and build the pruned network",
    "analyze": "correlation and mutual information of loci with the response",
    "eval": "cross-dataset generalization grid for all seven models",
    "bench": "time training and inference of the full and pruned networks",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="prnet", description="Pathway-masked network pruning pipeline.")
    parser.add_argument("--version", action="version", version=f"prnet {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    for name, help_text in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--out", help="override the configured output directory")
        p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return parser


# ---------------------------------------------------------------------------
# shared helpers


def _dataset(cfg: RunConfig):
    """The configured cohort and, for synthetic data, its ground truth."""
    data = cfg.section("data")
    if "mutation" in data:
        ds = load_dataset(cfg.path(data["mutation"]), cfg.path(data["cna"]), cfg.path(data["labels"]),
                          name=data.get("name"))
        return ds, None
    spec = {**SYNTH_DEFAULTS, **data.get("synthetic", {})}
    return generate_synthetic(spec["n"], spec["genes"], spec["planted"], spec["noise"], cfg.seed,
                              effect_scale=spec["effect_scale"])


def _hierarchy(cfg: RunConfig, genes):
    spec = cfg.raw.get("hierarchy")
    if isinstance(spec, str):
        return load_hierarchy(cfg.path(spec))
    toy = {**TOY_DEFAULTS, **(spec or {}).get("toy", {})}
    levels = toy["levels"] or reference_levels(len(genes))
    return generate_toy_hierarchy(len(genes), levels, toy["fanin"], cfg.seed, genes=genes)


def _split(cfg: RunConfig, ds):
    return split(ds, cfg.section("split").get("test_fraction", 0.2), cfg.seed)


def _shifted(cfg: RunConfig, truth, required_genes=()):
    spec = {**SHIFT_DEFAULTS, **cfg.section("shifted")}
    return generate_shifted_family(truth, spec["count"], spec["n"], cfg.seed + 1,
                                   spec["panel_fraction"], spec["frequency_shift"],
                                   required_genes=required_genes)


def _eval_datasets(cfg: RunConfig, truth, required_genes=()):
    entries = cfg.section("eval").get("datasets")
    if entries:
        return [load_dataset(cfg.path(e["mutation"]), cfg.path(e["cna"]), cfg.path(e["labels"]),
                             name=e.get("name", f"eval{i + 1}")) for i, e in enumerate(entries)]
    if truth is None:
        raise ConfigError("eval needs 'eval.datasets' unless the data is synthetic")
    return _shifted(cfg, truth, required_genes)


def _g1(cfg: RunConfig, section: str, train_ds, test_ds, hierarchy):
    """G1 from the configured ``g1.json`` or, failing that, a fresh pipeline run."""
    sec = cfg.section(section)
    if "g1" in sec:
        return tuple(load_g1(cfg.path(sec["g1"])))
    log.info("no g1 configured for %s; running the pruning pipeline first", section)
    result = run_pipeline(train_ds, test_ds, hierarchy, cfg.train_config(), cfg.selection_config())
    return result.selection.g1


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _training_log(path, report):
    rows = []
    for i, loss in enumerate(report.losses):
        vr = report.val_recall[i] if i < len(report.val_recall) else None
        va = report.val_auc[i] if i < len(report.val_auc) else None
        rows.append([i + 1, repr(loss), "" if vr is None else repr(vr), "" if va is None else repr(va)])
    _write_csv(path, ["epoch", "loss", "val_recall", "val_auc"], rows)


def _gene_csv(path, genes):
    _write_csv(path, ["rank", "gene", "score"], [[i, g, repr(s)] for i, (g, s) in enumerate(genes, 1)])


def _git_version():
    try:
        out = subprocess.run(["git", "describe", "--always", "--tags", "--dirty"],
                             cwd=Path(__file__).resolve().parent, capture_output=True, text=True, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return None
    if out.returncode != 0:
        return None
    return out.stdout.strip() or None


def _manifest(cfg: RunConfig, command: str, extra: dict | None = None) -> dict:
    return {
        "command": command,
        "config": cfg.resolved(),
        "seeds": {"global": cfg.seed, "split": cfg.seed, "selection": cfg.seed, "train": cfg.seed},
        "version": __version__,
        "git": _git_version(),
        "inputs": {str(p): file_digest(p) for p in cfg.input_files()},
        **(extra or {}),
    }


def _write_manifest(cfg, command, extra=None, **reports):
    body = _manifest(cfg, command, extra)
    if any(v is not None for v in reports.values()):
        emit_reports(cfg.out_dir, manifest=body, **reports)
    else:
        (cfg.out_dir / "manifest.json").write_text(json.dumps(body, indent=2, sort_keys=True) + "\n",
                                                  encoding="utf-8")


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(cfg: RunConfig) -> int:
    ds, truth = _dataset(cfg)
    if truth is None:
        raise ConfigError("synth needs 'data.synthetic', not data files")
    save_dataset_csv(ds, cfg.out_dir, "synthetic")
    truth.save(cfg.out_dir / "truth.json")
    extra = {"dataset": {"n": ds.n, "m": ds.m, "positives": ds.n_positive}}
    if "shifted" in cfg.raw:
        family = _shifted(cfg, truth)
        for d in family:
            save_dataset_csv(d, cfg.out_dir, d.name)
        extra["shifted"] = [{"name": d.name, "n": d.n, "m": d.m, "positives": d.n_positive} for d in family]
    _write_manifest(cfg, "synth", extra)
    print(f"wrote {ds.n} samples x {ds.m} loci ({ds.n_positive} positive) to {cfg.out_dir}")
    return 0


def cmd_train(cfg: RunConfig) -> int:
    ds, _ = _dataset(cfg)
    train_ds, test_ds = _split(cfg, ds)
    hierarchy = _hierarchy(cfg, ds.genes)
    net, report = train_full(train_ds, hierarchy, cfg.train_config())
    save_model(net, cfg.out_dir / "pnet")
    _training_log(cfg.out_dir / "training_log.csv", report)
    held_out = {"P-NET": threshold_metrics(predict(net, test_ds), test_ds.y)}
    _write_manifest(cfg, "train", {"params": count_params(net), "epochs_run": report.stopped_epoch},
                    metrics=held_out)
    m = held_out["P-NET"]
    print(f"P-NET held-out AUC {m.auc:.4f}, recall {m.recall:.4f} ({report.stopped_epoch} epochs)")
    return 0


def cmd_attribute(cfg: RunConfig) -> int:
    ds, _ = _dataset(cfg)
    train_ds, _test = _split(cfg, ds)
    sec = cfg.section("attribute")
    if "model" in sec:
        net = load_model(cfg.path(sec["model"]))
    else:
        net, _ = train_full(train_ds, _hierarchy(cfg, ds.genes), cfg.train_config())
    ranking = importance_ranking(net, train_ds, how=sec.get("how", "sum"))
    ranking.to_csv(cfg.out_dir / "importance.csv")
    _gene_csv(cfg.out_dir / "gene_importance.csv", gene_rollup(filter_nonzero(ranking)))
    nonzero = int(np.count_nonzero(ranking.scores))
    _write_manifest(cfg, "attribute", {"ranking_digest": ranking.digest(), "nonzero_loci": nonzero})
    print(f"ranked {len(ranking)} loci ({nonzero} with non-zero importance)")
    return 0


def cmd_prune(cfg: RunConfig) -> int:
    ds, truth = _dataset(cfg)
    train_ds, test_ds = _split(cfg, ds)
    hierarchy = _hierarchy(cfg, ds.genes)
    result = run_pipeline(train_ds, test_ds, hierarchy, cfg.train_config(), cfg.selection_config())
    save_model(result.full, cfg.out_dir / "pnet")
    save_model(result.prnet.network, cfg.out_dir / "prnet")
    result.ranking.to_csv(cfg.out_dir / "importance.csv")
    _gene_csv(cfg.out_dir / "gene_importance.csv", result.ranked_genes)
    full_params, pruned_params = count_params(result.full), result.prnet.count_params()
    extra = {
        "chosen_size": result.selection.chosen_size,
        "g1_loci": len(result.selection.g1),
        "params": {"P-NET": full_params, "PR-NET": pruned_params},
        "ranking_digest": result.ranking.digest(),
    }
    if truth is not None:
        chosen = {l.gene for l in result.selection.g1}
        extra["planted_recovered"] = sorted(chosen & set(truth.planted_genes))
    _write_manifest(cfg, "prune", extra, metrics=result.held_out(test_ds), selection=result.selection)
    print(f"chose {result.selection.chosen_size} genes ({len(result.selection.g1)} loci); "
          f"parameters {full_params['total']} -> {pruned_params['total']}")
    return 0


def cmd_analyze(cfg: RunConfig) -> int:
    ds, truth = _dataset(cfg)
    sec = cfg.section("analyze")
    top_k = int(sec.get("top_k", 20))
    if "g1" in sec:
        subset = load_g1(cfg.path(sec["g1"]))
    elif "ranking" in sec:
        subset = list(ImportanceRanking.from_csv(cfg.path(sec["ranking"])).loci[:top_k])
    else:
        subset = list(ds.loci)
    datasets = [ds]
    if truth is not None and "shifted" in cfg.raw:
        datasets += _shifted(cfg, truth)
    path = cfg.out_dir / "association.csv"
    skipped = []
    for i, d in enumerate(datasets):
        have = set(d.loci)
        present = [l for l in subset if l in have]
        skipped += [f"{d.name}:{l}" for l in subset if l not in have]
        association_report(d, present).to_csv(path, append=i > 0)
    extra = {"datasets": [d.name for d in datasets], "loci": len(subset), "absent": skipped}
    if "before" in sec and "after" in sec:
        before = ImportanceRanking.from_csv(cfg.path(sec["before"]))
        after = ImportanceRanking.from_csv(cfg.path(sec["after"]))
        comparison = compare_rankings(before, after, min(top_k, len(before), len(after)))
        comparison.to_csv(cfg.out_dir / "ranking_comparison.csv")
        extra["spearman"] = comparison.spearman
    _write_manifest(cfg, "analyze", extra)
    print(f"association report for {len(subset)} loci over {len(datasets)} dataset(s)")
    return 0


def cmd_eval(cfg: RunConfig) -> int:
    ds, truth = _dataset(cfg)
    train_ds, test_ds = _split(cfg, ds)
    hierarchy = _hierarchy(cfg, ds.genes)
    sec = cfg.section("eval")
    mode = sec.get("mode", "universe")
    g1 = _g1(cfg, "eval", train_ds, test_ds, hierarchy)
    eval_sets = _eval_datasets(cfg, truth)
    sizes = sec.get("train_sizes") or scaled_sizes(TRAIN_SIZES_REFERENCE, TRAIN_SIZES_REFERENCE_N, ds.n)
    universe = list(ds.loci)
    seen = set(universe)
    for d in eval_sets:
        universe += [l for l in d.loci if l not in seen]
        seen.update(d.loci)
    models = standard_models(hierarchy, cfg.train_config(), g1, sec.get("baseline_params"))
    grid = generalization_run(models, ds, sizes, eval_sets, universe, cfg.seed, mode, g1,
                              tolerance=float(sec.get("tolerance", 0.0)))
    extra = {"mode": mode, "train_sizes": list(sizes), "g1": [str(l) for l in g1],
             "eval_datasets": [d.name for d in eval_sets]}
    _write_manifest(cfg, "eval", extra, grid=grid)
    for model in grid.models:
        r, a = grid.mean(model, "recall"), grid.mean(model, "auc")
        print(f"{model:>16}: mean recall {'n/a' if r is None else f'{r:.4f}'}, "
              f"mean AUC {'n/a' if a is None else f'{a:.4f}'}")
    violations = sorted({c.error for c in grid.errors() if c.error.startswith(ConstraintViolation.__name__)})
    if violations:
        for v in violations:
            print(f"prnet: error: {v}", file=sys.stderr)
        return 2
    return 0


def cmd_bench(cfg: RunConfig) -> int:
    ds, _ = _dataset(cfg)
    train_ds, test_ds = _split(cfg, ds)
    hierarchy = _hierarchy(cfg, ds.genes)
    sec = cfg.section("bench")
    g1 = _g1(cfg, "bench", train_ds, test_ds, hierarchy)
    # fixed epoch budget so both networks do the same amount of optimisation
    tcfg = cfg.train_config(early_stop_patience=0)
    models = [pnet_spec(hierarchy, tcfg), prnet_spec(hierarchy, tcfg, g1)]
    report = timing_benchmark(models, train_ds, int(sec.get("repetitions", 5)), cfg.seed)
    extra = {"speedup": {phase: report.speedup(phase, "P-NET", "PR-NET") for phase in ("train", "inference")}}
    _write_manifest(cfg, "bench", extra, timing=report)
    for phase, model, mean, var, std in report.rows():
        print(f"{phase:>9} {model:>7}: {mean:.4f}s (var {var:.3e}, std {std:.3e})")
    return 0


HANDLERS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "attribute": cmd_attribute,
    "prune": cmd_prune,
    "analyze": cmd_analyze,
    "eval": cmd_eval,
    "bench": cmd_bench,
}


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config, seed=args.seed, out=args.out)
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
    except (ConfigError, OSError) as exc:
        print(f"prnet: invalid configuration: {exc}", file=sys.stderr)
        return 1
    try:
        return HANDLERS[args.command](cfg)
    except (ConfigError, ParseError, DatasetError) as exc:
        print(f"prnet: invalid input: {exc}", file=sys.stderr)
        return 1
    except (PRNetError, ValueError, OSError) as exc:
        print(f"prnet: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
