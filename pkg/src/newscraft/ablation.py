"""Component-ablation and fusion-strategy benchmark harnesses."""

from __future__ import annotations

import csv
import dataclasses
from pathlib import Path

import numpy as np

from .config import COMPONENTS, ModelConfig
from .dataset import FeatureDims, NewsVideoSample
from .encodings import DurationBinner
from .errors import ConfigError
from .estimator import fit_binners
from .fusion import FusionStrategy
from .network import SampleTensors, build_network
from .trainer import evaluate_samples, train_network


def component_grid(universe: tuple[str, ...] = COMPONENTS) -> list[tuple[str, ...]]:
    """The standard ablation rows: all components, selection-only,
    editing-only, then each single component removed."""
    universe = tuple(universe)
    for c in universe:
        if c not in COMPONENTS:
            raise ConfigError(f"unknown component {c!r}")
    rows: list[tuple[str, ...]] = [universe]
    selection = tuple(c for c in universe if c in ("SEN", "SEM"))
    editing = tuple(c for c in universe if c in ("SPA", "TEM"))
    if selection and editing:
        rows.append(selection)
        rows.append(editing)
    if len(universe) > 1:
        for c in universe:
            rows.append(tuple(x for x in universe if x != c))
    # drop duplicates while keeping order
    seen = set()
    unique = []
    for row in rows:
        if row and row not in seen:
            seen.add(row)
            unique.append(row)
    return unique


def run_trial(config: ModelConfig, dims: FeatureDims,
              train: list[NewsVideoSample], val: list[NewsVideoSample],
              test: list[NewsVideoSample],
              binners: dict[str, DurationBinner] | None = None) -> dict:
    """Train one configuration and report test metrics + parameter count."""
    config.validate()
    if binners is None and config.with_temporal():
        binners = fit_binners(train, config.n_duration_bins)
    net = build_network(config, dims, binners if config.with_temporal() else None)
    train_t = [SampleTensors.from_sample(s) for s in train]
    val_t = [SampleTensors.from_sample(s) for s in val]
    test_t = [SampleTensors.from_sample(s) for s in test]
    history, best_epoch = train_network(net, config, train_t, val_t)
    report = evaluate_samples(net, test_t)
    return {
        "accuracy": report.accuracy,
        "macro_f1": report.macro_f1,
        "best_epoch": best_epoch,
        "epochs_run": len(history),
        "n_parameters": sum(p.numel() for p in net.parameters()),
    }


def _mean_std(runs: list[dict], key: str) -> tuple[float, float]:
    values = np.array([r[key] for r in runs], dtype=np.float64)
    return float(values.mean()), float(values.std())


def ablate(base_config: ModelConfig, dims: FeatureDims,
           train, val, test,
           component_sets: list[tuple[str, ...]] | None = None,
           runs: int = 3) -> list[dict]:
    """Retrain per component set; each row reports mean +- std over ``runs``."""
    sets = component_sets if component_sets is not None else component_grid(
        tuple(base_config.components))
    rows = []
    for components in sets:
        if not components:
            raise ConfigError("ablation row with no components")
        trials = []
        for r in range(runs):
            cfg = dataclasses.replace(base_config, components=tuple(components),
                                      seed=base_config.seed + r)
            trials.append(run_trial(cfg, dims, train, val, test))
        acc_m, acc_s = _mean_std(trials, "accuracy")
        f1_m, f1_s = _mean_std(trials, "macro_f1")
        rows.append({
            "components": tuple(components),
            **{c: c in components for c in COMPONENTS},
            "acc_mean": acc_m, "acc_std": acc_s,
            "f1_mean": f1_m, "f1_std": f1_s,
            "runs": runs,
            "n_parameters": trials[0]["n_parameters"],
        })
    return rows


def fuse_bench(base_config: ModelConfig, dims: FeatureDims,
               train, val, test,
               strategies: tuple[str, ...] | None = None,
               runs: int = 3) -> list[dict]:
    """Retrain per fusion strategy; rows shaped like the ablation grid."""
    names = strategies if strategies is not None else tuple(s.value for s in FusionStrategy)
    rows = []
    for name in names:
        FusionStrategy(name)  # validate early
        trials = []
        for r in range(runs):
            cfg = dataclasses.replace(base_config, fusion=name,
                                      seed=base_config.seed + r)
            trials.append(run_trial(cfg, dims, train, val, test))
        acc_m, acc_s = _mean_std(trials, "accuracy")
        f1_m, f1_s = _mean_std(trials, "macro_f1")
        rows.append({
            "fusion": name,
            "acc_mean": acc_m, "acc_std": acc_s,
            "f1_mean": f1_m, "f1_std": f1_s,
            "runs": runs,
        })
    return rows


def write_ablation_csv(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*COMPONENTS, "acc_mean", "acc_std", "f1_mean", "f1_std",
                    "runs", "n_parameters"])
        for row in rows:
            w.writerow([*("x" if row[c] else "" for c in COMPONENTS),
                        f"{row['acc_mean']:.4f}", f"{row['acc_std']:.4f}",
                        f"{row['f1_mean']:.4f}", f"{row['f1_std']:.4f}",
                        row["runs"], row["n_parameters"]])


def write_fusion_csv(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["fusion", "acc_mean", "acc_std", "f1_mean", "f1_std", "runs"])
        for row in rows:
            w.writerow([row["fusion"],
                        f"{row['acc_mean']:.4f}", f"{row['acc_std']:.4f}",
                        f"{row['f1_mean']:.4f}", f"{row['f1_std']:.4f}",
                        row["runs"]])
