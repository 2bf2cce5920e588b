"""Command-line entry point.

Subcommands: synth, validate, train, eval, ablate, fuse-bench, analyze.
Exit codes: 0 success, 1 data/validation failure, 2 usage error. Every
command writes a resolved-config.json beside its artifacts so runs can be
reproduced exactly.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ablation import ablate, component_grid, fuse_bench, write_ablation_csv, write_fusion_csv
from .analysis import corpus_report, write_report
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ModelConfig
from .dataset import load_manifest, load_samples, temporal_split
from .errors import NewscraftError
from .estimator import fit_binners
from .network import SampleTensors, build_network
from .synth import SynthSpec, synthesize_dataset
from .tensorio import read_tensor
from .trainer import evaluate_samples, train_network, write_history_csv
from .validation import ValidationError


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NewscraftError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="newscraft",
        description="Creative-process-aware fake news detection for short videos.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--spec", required=True, help="SynthSpec JSON file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("validate", help="fully validate a manifest and its blobs")
    p.add_argument("--data", required=True, help="manifest.json path")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("train", help="train a detector on a manifest")
    _add_train_args(p)
    p.add_argument("--runs", type=int, default=1,
                   help="train this many seeds and report mean +- std")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--ckpt", required=True, help="checkpoint directory")
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=("train", "val", "test", "all"), default="test")
    p.add_argument("--ratios", default="0.7,0.15,0.15")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="retrain with components toggled off")
    _add_train_args(p)
    p.add_argument("--runs", type=int, default=3)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("fuse-bench", help="compare all fusion strategies")
    _add_train_args(p)
    p.add_argument("--runs", type=int, default=3)
    p.set_defaults(func=cmd_fuse_bench)

    p = sub.add_parser("analyze", help="corpus-level fake-vs-real analysis")
    p.add_argument("--data", required=True)
    p.add_argument("--normalization", choices=("softmax", "shift_l1"), default="softmax")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)

    return parser


def _add_train_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="manifest.json path")
    p.add_argument("--config", help="ModelConfig JSON; flags override its fields")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--ratios", default="0.7,0.15,0.15",
                   help="train/val/test fractions for the chronological split")
    p.add_argument("--fusion", default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--components", default=None,
                   help="comma-separated subset of SEN,SEM,SPA,TEM")


def cmd_synth(args) -> int:
    spec = SynthSpec.from_json(args.spec)
    out = Path(args.out)
    manifest = synthesize_dataset(spec, args.seed, out)
    n_fake = sum(1 for r in manifest.records if r.label == 1)
    _write_resolved(out, "synth", {"spec": spec.to_dict(), "seed": args.seed})
    print(f"wrote {len(manifest)} samples ({n_fake} fake, "
          f"{len(manifest) - n_fake} real) to {out / 'manifest.json'}")
    return 0


def cmd_validate(args) -> int:
    manifest = load_manifest(args.data)  # header-level validation
    failures = []
    for rec in manifest.records:
        for role in rec.blobs:
            try:
                values = read_tensor(manifest.blob_path(rec, role))
            except NewscraftError as e:
                failures.append((rec.id, f"{role}: {e}"))
                continue
            if not _finite(values):
                failures.append((rec.id, f"{role}: non-finite values"))
    if failures:
        for sid, msg in failures:
            print(f"invalid: sample {sid}: {msg}", file=sys.stderr)
        ids = sorted({sid for sid, _ in failures})
        print(f"validation failed for {len(ids)} sample(s): {', '.join(ids)}",
              file=sys.stderr)
        return 1
    print(f"ok: {len(manifest)} samples, all blobs consistent")
    return 0


def cmd_train(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = _resolve_config(args)
    manifest = load_manifest(args.data)
    ratios = _parse_ratios(args.ratios)
    train_m, val_m, test_m = temporal_split(manifest, ratios)
    train = load_samples(train_m)
    val = load_samples(val_m)
    _write_resolved(out, "train", {
        "data": str(Path(args.data).resolve()), "ratios": list(ratios),
        "runs": args.runs, "config": config.to_dict()})
    summaries = []
    for run in range(args.runs):
        cfg = dataclasses.replace(config, seed=config.seed + run)
        run_dir = out if args.runs == 1 else out / f"run_{run}"
        run_dir.mkdir(parents=True, exist_ok=True)
        binners = fit_binners(train, cfg.n_duration_bins) if cfg.with_temporal() else None
        net = build_network(cfg, manifest.dims, binners)
        train_t = [SampleTensors.from_sample(s) for s in train]
        val_t = [SampleTensors.from_sample(s) for s in val]
        history, best_epoch = train_network(net, cfg, train_t, val_t)
        save_checkpoint(run_dir / "checkpoint", net, cfg, manifest.dims, binners)
        write_history_csv(history, run_dir / "history.csv")
        best = history[best_epoch]
        summaries.append({"seed": cfg.seed, "best_epoch": best_epoch,
                          "val_acc": best.val_accuracy,
                          "val_macro_f1": best.val_macro_f1})
        print(f"run {run}: best epoch {best_epoch}, "
              f"val acc {best.val_accuracy:.4f}, val macro F1 {best.val_macro_f1:.4f}")
    if args.runs > 1:
        accs = [s["val_acc"] for s in summaries]
        f1s = [s["val_macro_f1"] for s in summaries]
        print(f"over {args.runs} runs: val acc {_ms(accs)}, val macro F1 {_ms(f1s)}")
    (out / "runs.json").write_text(json.dumps(summaries, indent=1, sort_keys=True) + "\n")
    return 0


def cmd_eval(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    net, config, dims, _ = load_checkpoint(args.ckpt)
    manifest = load_manifest(args.data)
    _check_dims_compatible(dims, manifest.dims)
    if args.split == "all":
        chosen = manifest
    else:
        parts = dict(zip(("train", "val", "test"),
                         temporal_split(manifest, _parse_ratios(args.ratios))))
        chosen = parts[args.split]
    samples = [SampleTensors.from_sample(s) for s in load_samples(chosen)]
    report = evaluate_samples(net, samples, warn=True)
    (out / "eval.json").write_text(report.to_json() + "\n")
    _write_resolved(out, "eval", {
        "ckpt": str(Path(args.ckpt).resolve()), "data": str(Path(args.data).resolve()),
        "split": args.split, "ratios": args.ratios, "config": config.to_dict()})
    print(f"{args.split}: n={report.n} accuracy={report.accuracy:.4f} "
          f"macro_f1={report.macro_f1:.4f}")
    print(f"  fake: P={report.fake.precision:.4f} R={report.fake.recall:.4f} "
          f"F1={report.fake.f1:.4f}")
    print(f"  real: P={report.real.precision:.4f} R={report.real.recall:.4f} "
          f"F1={report.real.f1:.4f}")
    return 0


def cmd_ablate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = _resolve_config(args)
    manifest = load_manifest(args.data)
    train, val, test = (load_samples(m) for m in
                        temporal_split(manifest, _parse_ratios(args.ratios)))
    sets = component_grid(tuple(config.components))
    rows = ablate(config, manifest.dims, train, val, test,
                  component_sets=sets, runs=args.runs)
    write_ablation_csv(rows, out / "ablation.csv")
    _write_resolved(out, "ablate", {
        "data": str(Path(args.data).resolve()), "runs": args.runs,
        "ratios": args.ratios, "config": config.to_dict(),
        "rows": [list(r["components"]) for r in rows]})
    for row in rows:
        name = "+".join(row["components"])
        print(f"{name:<16} acc {row['acc_mean']:.4f}+-{row['acc_std']:.4f}  "
              f"f1 {row['f1_mean']:.4f}+-{row['f1_std']:.4f}")
    print(f"wrote {out / 'ablation.csv'}")
    return 0


def cmd_fuse_bench(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = _resolve_config(args)
    manifest = load_manifest(args.data)
    train, val, test = (load_samples(m) for m in
                        temporal_split(manifest, _parse_ratios(args.ratios)))
    rows = fuse_bench(config, manifest.dims, train, val, test, runs=args.runs)
    write_fusion_csv(rows, out / "fusion.csv")
    _write_resolved(out, "fuse-bench", {
        "data": str(Path(args.data).resolve()), "runs": args.runs,
        "ratios": args.ratios, "config": config.to_dict()})
    for row in rows:
        print(f"{row['fusion']:<12} acc {row['acc_mean']:.4f}+-{row['acc_std']:.4f}  "
              f"f1 {row['f1_mean']:.4f}+-{row['f1_std']:.4f}")
    print(f"wrote {out / 'fusion.csv'}")
    return 0


def cmd_analyze(args) -> int:
    out = Path(args.out)
    manifest = load_manifest(args.data)
    report = corpus_report(manifest, normalization=args.normalization)
    write_report(report, out)
    _write_resolved(out, "analyze", {
        "data": str(Path(args.data).resolve()), "normalization": args.normalization})
    for obs in (report.divergence, report.color, report.dynamism):
        if obs.available:
            print(f"{obs.name}: fake mean {obs.fake_mean:.4f}, real mean "
                  f"{obs.real_mean:.4f}, {obs.test} p={obs.p_value:.2e} "
                  f"{'(significant)' if obs.significant else '(not significant)'}")
        else:
            print(f"{obs.name}: skipped ({obs.note})")
    print(f"wrote {out / 'report.json'}")
    return 0


# helpers --------------------------------------------------------------------


def _check_dims_compatible(trained, data) -> None:
    fields = ("sent_audio", "sent_text", "sem_text", "sem_frame",
              "grid_feat", "grid_size")
    bad = [f for f in fields if getattr(trained, f) != getattr(data, f)]
    if bad:
        raise ValidationError(
            "checkpoint feature dims do not match the manifest: "
            + ", ".join(f"{f} {getattr(trained, f)} != {getattr(data, f)}" for f in bad))


def _resolve_config(args) -> ModelConfig:
    config = ModelConfig.from_json(args.config) if args.config else ModelConfig()
    if args.seed is not None:
        config.seed = args.seed
    if getattr(args, "fusion", None):
        config.fusion = args.fusion
    if getattr(args, "lr", None) is not None:
        config.lr = args.lr
    if getattr(args, "batch_size", None) is not None:
        config.batch_size = args.batch_size
    if getattr(args, "epochs", None) is not None:
        config.max_epochs = args.epochs
    if getattr(args, "dim", None) is not None:
        config.dim = args.dim
    if getattr(args, "components", None):
        parts = tuple(c.strip().upper() for c in args.components.split(",") if c.strip())
        config.components = parts
    return config.validate()


def _parse_ratios(text: str) -> tuple[float, float, float]:
    try:
        parts = tuple(float(x) for x in text.split(","))
    except ValueError as e:
        raise ValidationError(f"cannot parse ratios {text!r}: {e}") from e
    if len(parts) != 3:
        raise ValidationError(f"ratios need three numbers, got {text!r}")
    return parts


def _write_resolved(out: Path, command: str, payload: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    doc = {"command": command, **payload}
    (out / "resolved-config.json").write_text(
        json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _ms(values) -> str:
    v = np.asarray(values, dtype=float)
    return f"{v.mean():.4f}+-{v.std():.4f}"


def _finite(values) -> bool:
    return bool(np.isfinite(values).all())


if __name__ == "__main__":
    sys.exit(main())
