"""Run configuration: a JSON file with two flat overrides (seed, output directory)."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, fields
from pathlib import Path

from .network import TrainConfig
from .pruning import SelectionConfig


class ConfigError(ValueError):
    """The run configuration is invalid; maps to exit code 1."""


DATA_FILE_KEYS = ("mutation", "cna", "labels")
SYNTH_DEFAULTS = {"n": 1200, "genes": 600, "planted": 15, "noise": 0.5, "effect_scale": 1.0}
SHIFT_DEFAULTS = {"count": 4, "n": 600, "panel_fraction": 0.5, "frequency_shift": 0.5}
TOY_DEFAULTS = {"fanin": 3, "levels": None}
TRAIN_SIZES_REFERENCE = (202, 404, 606, 808)
TRAIN_SIZES_REFERENCE_N = 1013


@dataclass
class RunConfig:
    seed: int
    out_dir: Path
    raw: dict
    base_dir: Path

    def section(self, name) -> dict:
        value = self.raw.get(name) or {}
        if not isinstance(value, dict):
            raise ConfigError(f"'{name}' must be an object")
        return value

    def path(self, value) -> Path:
        p = Path(value)
        return p if p.is_absolute() else (self.base_dir / p)

    def train_config(self, **changes) -> TrainConfig:
        return _build(TrainConfig, self.section("train"), "train", seed=self.seed, **changes)

    def selection_config(self) -> SelectionConfig:
        return _build(SelectionConfig, self.section("selection"), "selection", seed=self.seed)

    def input_files(self) -> list[Path]:
        """Every file the configuration refers to, for hashing into the manifest."""
        out = []
        data = self.section("data")
        for key in DATA_FILE_KEYS:
            if key in data:
                out.append(self.path(data[key]))
        if isinstance(self.raw.get("hierarchy"), str):
            out.append(self.path(self.raw["hierarchy"]))
        for sec, keys in (("eval", ("g1",)), ("bench", ("g1",)),
                          ("analyze", ("ranking", "before", "after", "g1")), ("attribute", ("model",))):
            for key in keys:
                if key in self.section(sec):
                    p = self.path(self.section(sec)[key])
                    out.append(p.with_suffix(".json") if sec == "attribute" else p)
        for entry in self.section("eval").get("datasets", []):
            for key in DATA_FILE_KEYS:
                out.append(self.path(entry[key]))
        return out

    def resolved(self) -> dict:
        body = copy.deepcopy(self.raw)
        # the output location is not part of the experiment, so two runs
        # into different directories still share a manifest
        body.pop("out_dir", None)
        body["seed"] = self.seed
        return body


def _build(cls, values, section, **forced):
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in '{section}': {sorted(unknown)}")
    args = {**values, **forced}
    if "candidate_sizes" in args:
        args["candidate_sizes"] = tuple(args["candidate_sizes"])
    try:
        return cls(**args)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"'{section}': {exc}") from exc


def load_config(path, seed: int | None = None, out: str | None = None) -> RunConfig:
    """Read and validate a run configuration; ``seed`` and ``out`` override the file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    seed = raw.get("seed") if seed is None else seed
    if seed is None:
        raise ConfigError("a seed is required (config 'seed' or --seed)")
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")
    out_dir = out if out is not None else raw.get("out_dir")
    if not out_dir:
        raise ConfigError("an output directory is required (config 'out_dir' or --out)")
    base = path.resolve().parent
    out_dir = Path(out_dir)
    if not out_dir.is_absolute():
        out_dir = (Path.cwd() / out_dir) if out is not None else (base / out_dir)
    cfg = RunConfig(seed, out_dir, raw, base)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    data = cfg.section("data")
    has_files = any(k in data for k in DATA_FILE_KEYS)
    if has_files and "synthetic" in data:
        raise ConfigError("'data' takes either files or 'synthetic', not both")
    if has_files:
        missing = [k for k in DATA_FILE_KEYS if k not in data]
        if missing:
            raise ConfigError(f"'data' is missing {missing}")
    elif "synthetic" in data:
        unknown = set(data["synthetic"]) - set(SYNTH_DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown key(s) in 'data.synthetic': {sorted(unknown)}")
    hierarchy = cfg.raw.get("hierarchy")
    if isinstance(hierarchy, dict):
        unknown = set(hierarchy.get("toy", {})) - set(TOY_DEFAULTS)
        if unknown or set(hierarchy) - {"toy"}:
            raise ConfigError("'hierarchy' must be a file path or {\"toy\": {...}}")
    elif hierarchy is not None and not isinstance(hierarchy, str):
        raise ConfigError("'hierarchy' must be a file path or {\"toy\": {...}}")
    frac = cfg.section("split").get("test_fraction", 0.2)
    if not (isinstance(frac, (int, float)) and 0 < frac < 1):
        raise ConfigError(f"split.test_fraction must lie in (0, 1), got {frac!r}")
    cfg.train_config()
    cfg.selection_config()
    for p in cfg.input_files():
        if not p.is_file():
            raise ConfigError(f"referenced file does not exist: {p}")
