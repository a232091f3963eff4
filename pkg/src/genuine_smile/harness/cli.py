"""Command-line entry point: ``genuine-smile <command> [options]``.

Commands
--------
synth      write a synthetic dataset directory
extract    dataset directory -> feature cache
train      feature cache -> model file (optionally holding out one fold)
evaluate   model file + feature cache -> accuracy on a fold
fuse       member model files + feature cache -> fusion head file
crossval   full K-fold evaluation -> report.{txt,csv,json}
bench      per-sequence compute timing -> timing.{txt,json}

``--config``, ``--seed``, ``--out`` and ``--data`` are accepted before or
after the command.  Exit status is 0 on success, 1 on invalid input or
usage, 2 on a numeric failure (divergence, non-finite values).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..classifier import (
    AUDA_KINDS,
    FUSION_ORDER,
    FusionHead,
    fit_head,
    fusion_proba,
    init_fusion_head,
    init_model,
    load_model,
    predict_proba,
    save_model,
    stacked_embeddings,
    train,
)
from ..errors import InvalidArgument, NumericFailure, SmileError
from .bench import bench_timing, extraction_pipelines, method_pipelines
from .config import RunConfig, load_config
from .crossval import assign_folds, fold_seed, kfold_evaluate
from .data import FeatureStore, extract_features, load_dataset, write_dataset
from .synth import synth_generate

log = logging.getLogger("genuine_smile")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _global_flags(p: argparse.ArgumentParser, default):
    p.add_argument("--config", type=Path, default=default, help="run configuration (JSON)")
    p.add_argument("--seed", type=int, default=default, help="override the configured seed")
    p.add_argument("--out", type=Path, default=default, help="output directory")
    p.add_argument("--data", type=Path, default=default, help="dataset directory")
    p.add_argument("-v", "--verbose", action="store_true", default=default)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="genuine-smile", description="Spontaneous vs posed smile classification.")
    _global_flags(parser, None)
    common = _Parser(add_help=False)
    _global_flags(common, argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    p.add_argument("--n", type=int, default=100, help="sequences per class")
    p.add_argument("--noise", type=float, help="override the configured noise level")

    sub.add_parser("extract", parents=[common], help="dataset directory -> feature cache")

    p = sub.add_parser("train", parents=[common], help="train one model on a feature cache")
    p.add_argument("--cache", type=Path, required=True)
    p.add_argument("--kind", required=True, choices=FUSION_ORDER)
    p.add_argument("--fold", type=int, default=0, help="hold out this fold (0 = use everything)")

    p = sub.add_parser("evaluate", parents=[common], help="accuracy of a model on a fold")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--members", type=Path, nargs="*", default=[],
                   help="member model files (fusion heads only)")
    p.add_argument("--cache", type=Path, required=True)
    p.add_argument("--fold", type=int, default=0, help="test fold (0 = every sequence)")

    p = sub.add_parser("fuse", parents=[common], help="train a fusion head over member models")
    p.add_argument("--models", type=Path, nargs="+", required=True)
    p.add_argument("--cache", type=Path, required=True)
    p.add_argument("--fold", type=int, default=0, help="hold out this fold (0 = use everything)")

    p = sub.add_parser("crossval", parents=[common], help="K-fold evaluation")
    p.add_argument("--cache", type=Path, help="use cached features instead of --data")
    p.add_argument("--methods", nargs="*", help="methods to evaluate (default: configured)")
    p.add_argument("--no-timing", action="store_true", help="skip the timing benchmark")

    p = sub.add_parser("bench", parents=[common], help="per-sequence compute timing")
    p.add_argument("--models", type=Path, nargs="*", default=[],
                   help="model / fusion head files; without them only extraction is timed")
    return parser


# ---------------------------------------------------------------- helpers


def _require(value, flag: str):
    if value is None:
        raise InvalidArgument(f"{flag} is required for this command")
    return value


def _split(store: FeatureStore, cfg: RunConfig, fold: int):
    """Training and test indices for ``fold`` (0 means train and test on all)."""
    n = len(store)
    if fold == 0:
        return np.arange(n), np.arange(n)
    if not 1 <= fold <= cfg.folds:
        raise InvalidArgument(f"--fold must lie in 0..{cfg.folds}")
    folds = np.array(assign_folds(store.subjects, cfg.folds, cfg.seed))
    return np.flatnonzero(folds != fold), np.flatnonzero(folds == fold)


def _accuracy(p, y) -> float:
    return 100.0 * float(np.mean((p >= 0.5) == (y == 1)))


def _load_members(paths):
    models = {}
    for path in paths:
        m = load_model(path)
        if isinstance(m, FusionHead):
            raise InvalidArgument(f"{path} is a fusion head, expected a member model")
        models[m.kind] = m
    return models


def _method_name(members) -> str:
    members = tuple(members)
    return {FUSION_ORDER: "fusion_all", AUDA_KINDS: "fusion_auda"}.get(members, "fusion")


def _write_json(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1))
    return path


# --------------------------------------------------------------- commands


def cmd_synth(args, cfg: RunConfig):
    out = _require(args.out, "--out")
    params = cfg.synth if args.noise is None else replace(cfg.synth, noise=args.noise)
    ds = synth_generate(args.n, cfg.seed, params, cfg.features)
    write_dataset(ds, out, cfg.schema, cfg.features)
    print(f"wrote {len(ds)} sequences ({ds.class_counts}) to {out}")


def cmd_extract(args, cfg: RunConfig):
    data = _require(args.data or cfg.data, "--data")
    out = _require(args.out, "--out")
    store = extract_features(load_dataset(data, cfg.schema, cfg.features), cfg.features)
    store.write(out)
    print(f"cached {', '.join(sorted(store.families))} for {len(store)} sequences in {out}")


def cmd_train(args, cfg: RunConfig):
    out = _require(args.out, "--out")
    store = FeatureStore.read(args.cache)
    tr, _ = _split(store, cfg, args.fold)
    xs = store.inputs(args.kind, tr, cfg.frame_stride)
    y = store.labels[tr]
    model = init_model(args.kind, xs[0].shape[-1], cfg.model,
                       seed=fold_seed(cfg.seed, args.fold, args.kind + ":init"))
    model, history = train(model, xs, y, cfg.train_for(args.kind),
                           seed=fold_seed(cfg.seed, args.fold, args.kind))
    model.metadata.update(fold=args.fold, frame_stride=cfg.frame_stride)
    suffix = f"_fold{args.fold}" if args.fold else ""
    path = save_model(model, Path(out) / f"{args.kind}{suffix}.npz")
    last = history[-1] if history else {"loss": float("nan"), "accuracy": float("nan")}
    print(f"saved {path} (training loss {last['loss']:.4f}, accuracy {100 * last['accuracy']:.2f}%)")


def cmd_evaluate(args, cfg: RunConfig):
    store = FeatureStore.read(args.cache)
    _, te = _split(store, cfg, args.fold)
    y = store.labels[te]
    model = load_model(args.model)
    if isinstance(model, FusionHead):
        members = _load_members(args.members)
        inputs = {k: store.inputs(k, te, cfg.frame_stride) for k in model.members}
        p = fusion_proba(model, stacked_embeddings(model, members, inputs))
        name = _method_name(model.members)
    else:
        p = predict_proba(model, store.inputs(model.kind, te, cfg.frame_stride))
        name = model.kind
    acc = _accuracy(p, y)
    print(f"{name} accuracy on {'fold %d' % args.fold if args.fold else 'all sequences'}: {acc:.2f}%"
          f" ({te.size} sequences)")
    if args.out:
        _write_json(Path(args.out) / "evaluate.json",
                    {"method": name, "fold": args.fold, "accuracy": acc, "n": int(te.size)})


def cmd_fuse(args, cfg: RunConfig):
    out = _require(args.out, "--out")
    store = FeatureStore.read(args.cache)
    tr, _ = _split(store, cfg, args.fold)
    models = _load_members(args.models)
    head = init_fusion_head(models, list(models))
    inputs = {k: store.inputs(k, tr, cfg.frame_stride) for k in head.members}
    name = _method_name(head.members)
    E = stacked_embeddings(head, models, inputs)
    head, history = fit_head(head, E, store.labels[tr], cfg.train_for("fusion"),
                             seed=fold_seed(cfg.seed, args.fold, name))
    head.metadata.update(fold=args.fold)
    suffix = f"_fold{args.fold}" if args.fold else ""
    path = save_model(head, Path(out) / f"{name}{suffix}.npz")
    print(f"saved {path} over {', '.join(head.members)} (input dim {head.input_dim})")


def cmd_crossval(args, cfg: RunConfig):
    out = _require(args.out, "--out")
    if args.cache:
        data = FeatureStore.read(args.cache)
    else:
        data = load_dataset(_require(args.data or cfg.data, "--data"), cfg.schema, cfg.features)
    report = kfold_evaluate(data, args.methods, config=cfg,
                            timing=not args.no_timing and not args.cache)
    paths = report.write(out)
    print(report.to_table(), end="")
    print(f"report written to {paths['txt'].parent}")


def cmd_bench(args, cfg: RunConfig):
    ds = load_dataset(_require(args.data or cfg.data, "--data"), cfg.schema, cfg.features)
    recs = ds.records[: max(1, cfg.timing_sequences)]
    pipes = extraction_pipelines(cfg)
    if args.models:
        loaded = [load_model(p) for p in args.models]
        models = {m.kind: m for m in loaded if not isinstance(m, FusionHead)}
        heads = {_method_name(h.members): h for h in loaded if isinstance(h, FusionHead)}
        pipes.update(method_pipelines(list(models) + list(heads), models, heads, cfg))
    timings = bench_timing(pipes, recs, cfg.timing_repeats)
    lines = [f"{name:<20} {ms:10.3f} ms" for name, ms in timings.items()]
    print("\n".join(lines))
    if args.out:
        out = Path(args.out)
        _write_json(out / "timing.json", {"sequences": [r.sequence_id for r in recs],
                                          "repeats": cfg.timing_repeats, "median_ms": timings})
        (out / "timing.txt").write_text("\n".join(lines) + "\n")


COMMANDS = {
    "synth": cmd_synth,
    "extract": cmd_extract,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "fuse": cmd_fuse,
    "crossval": cmd_crossval,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        COMMANDS[args.command](args, cfg)
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    except (SmileError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
