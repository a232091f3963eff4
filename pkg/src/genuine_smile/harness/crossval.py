"""Subject-disjoint K-fold evaluation and the fold report."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from ..classifier import (
    AUDA_KINDS,
    FUSION_ORDER,
    KINDS,
    embed,
    fit_head,
    fusion_proba,
    init_fusion_head,
    init_model,
    predict_proba,
    train,
)
from ..errors import InvalidArgument
from .config import RunConfig
from .data import Dataset, FeatureStore, extract_features

log = logging.getLogger(__name__)

FUSION_METHODS = {"fusion_auda": AUDA_KINDS, "fusion_all": FUSION_ORDER}


def assign_folds(subjects: Sequence[str], K: int, seed: int = 0) -> list[int]:
    """Fold index (1..K) per sequence; all sequences of a subject share a fold.

    Subjects are shuffled with ``seed`` and dealt round-robin, so fold sizes
    differ by at most one subject.
    """
    uniq = sorted(set(subjects))
    if K < 2:
        raise InvalidArgument("K must be at least 2")
    if len(uniq) < K:
        raise InvalidArgument(f"{len(uniq)} subjects cannot fill {K} subject-disjoint folds")
    order = np.random.default_rng(np.random.SeedSequence([seed, 0xF01D])).permutation(len(uniq))
    fold_of = {uniq[j]: pos % K + 1 for pos, j in enumerate(order)}
    return [fold_of[s] for s in subjects]


def _check_discipline(subjects, ids, train_idx, test_idx, fold):
    if set(train_idx) & set(test_idx):
        raise RuntimeError(f"fold {fold}: a sequence is in both train and test")
    if {subjects[i] for i in train_idx} & {subjects[i] for i in test_idx}:
        raise RuntimeError(f"fold {fold}: a subject is in both train and test")
    if len({ids[i] for i in train_idx}) != len(train_idx):
        raise RuntimeError(f"fold {fold}: duplicated training sequence")


def fold_seed(seed: int, fold: int, name: str) -> int:
    """Seed for one (fold, model) pair, independent of evaluation order."""
    tag = int.from_bytes(name.encode(), "little") % (2**32)
    return int(np.random.SeedSequence([seed, fold, tag]).generate_state(1)[0])


@dataclass
class MethodResult:
    accuracies: list[float]
    time_ms: float | None = None

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        # population std over folds
        return float(np.std(self.accuracies))


@dataclass
class FoldReport:
    methods: dict[str, MethodResult]
    K: int
    seed: int
    fold_sizes: list[int] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, res in self.methods.items():
            if any(not 0.0 <= a <= 100.0 for a in res.accuracies):
                raise InvalidArgument(f"{name}: accuracies must lie in [0, 100]")

    def to_table(self) -> str:
        lines = [f"{'method':<14} {'accuracy (%)':>16} {'time (ms)':>10}"]
        for name, res in self.methods.items():
            t = "-" if res.time_ms is None else f"{res.time_ms:.2f}"
            lines.append(f"{name:<14} {res.mean:>8.2f} ± {res.std:<5.2f} {t:>10}")
        lines.append(f"{self.K}-fold, seed {self.seed}, fold sizes {self.fold_sizes}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "seed": self.seed,
            "fold_sizes": self.fold_sizes,
            "methods": {
                n: {"accuracies": r.accuracies, "mean": r.mean, "std": r.std, "time_ms": r.time_ms}
                for n, r in self.methods.items()
            },
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FoldReport":
        methods = {n: MethodResult(list(m["accuracies"]), m.get("time_ms"))
                   for n, m in d["methods"].items()}
        return cls(methods, d["K"], d["seed"], d.get("fold_sizes", []), d.get("config", {}))

    def write(self, directory) -> dict[str, Path]:
        """Emit ``report.txt``, ``report.csv`` and ``report.json`` into ``directory``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = {k: directory / f"report.{k}" for k in ("txt", "csv", "json")}
        paths["txt"].write_text(self.to_table())
        with open(paths["csv"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["method"] + [f"fold_{k}" for k in range(1, self.K + 1)]
                       + ["mean", "std", "time_ms"])
            for n, r in self.methods.items():
                w.writerow([n] + [repr(a) for a in r.accuracies]
                           + [repr(r.mean), repr(r.std), "" if r.time_ms is None else repr(r.time_ms)])
        paths["json"].write_text(json.dumps(self.to_dict(), indent=1))
        return paths


def _needed_kinds(methods) -> list[str]:
    kinds = set()
    for m in methods:
        if m in KINDS:
            kinds.add(m)
        kinds.update(FUSION_METHODS.get(m, ()))
    return [k for k in KINDS if k in kinds]


def train_fold_models(store: FeatureStore, train_idx, kinds, config: RunConfig, fold: int):
    """Train one model per kind on the training part of a fold."""
    y = store.labels[train_idx]
    models = {}
    for kind in kinds:
        xs = store.inputs(kind, train_idx, config.frame_stride)
        dim = xs[0].shape[-1]
        model = init_model(kind, dim, config.model, seed=fold_seed(config.seed, fold, kind + ":init"))
        models[kind], _ = train(model, xs, y, config.train_for(kind),
                                seed=fold_seed(config.seed, fold, kind))
    return models


def kfold_evaluate(data: Dataset | FeatureStore, methods: Sequence[str] | None = None,
                   K: int | None = None, seed: int | None = None,
                   config: RunConfig = RunConfig(), timing: bool = False) -> FoldReport:
    """Train on K-1 folds and test on the held-out one, K times, per method.

    Parameters
    ----------
    data : Dataset or FeatureStore
        Raw sequences (features are extracted once up front) or cached features.
    methods : sequence of str, optional
        Any of ``majority``, the four model kinds, ``fusion_auda`` and
        ``fusion_all``.  Defaults to ``config.methods``.
    K, seed : int, optional
        Override ``config.folds`` and ``config.seed``.
    timing : bool
        Also measure per-sequence compute time of every method (requires raw
        sequences).

    Returns
    -------
    FoldReport
        Per-fold accuracies in percent.  Fusion heads are trained on the
        training folds only, after their member models.
    """
    K = config.folds if K is None else K
    seed = config.seed if seed is None else seed
    methods = list(config.methods if methods is None else methods)
    config = replace(config, folds=K, seed=seed, methods=tuple(methods))
    dataset = data if isinstance(data, Dataset) else None
    store = extract_features(data, config.features) if dataset is not None else data
    labels = store.labels
    if np.any(labels < 0):
        raise InvalidArgument("cross-validation needs labelled sequences only")
    folds = np.array(assign_folds(store.subjects, K, seed))
    if dataset is not None:
        dataset.folds = dict(zip(store.ids, folds.tolist()))
    kinds = _needed_kinds(methods)
    results = {m: MethodResult([]) for m in methods}
    fold_sizes = []
    first_fold = {}
    for k in range(1, K + 1):
        test_idx = np.flatnonzero(folds == k)
        train_idx = np.flatnonzero(folds != k)
        _check_discipline(store.subjects, store.ids, train_idx, test_idx, k)
        fold_sizes.append(int(test_idx.size))
        y_tr, y_te = labels[train_idx], labels[test_idx]
        models = train_fold_models(store, train_idx, kinds, config, k)
        proba = {}
        emb_tr, emb_te = {}, {}
        for kind, model in models.items():
            if kind in methods:
                proba[kind] = predict_proba(model, store.inputs(kind, test_idx, config.frame_stride))
            if any(kind in FUSION_METHODS[m] for m in methods if m in FUSION_METHODS):
                emb_tr[kind] = embed(model, store.inputs(kind, train_idx, config.frame_stride))
                emb_te[kind] = embed(model, store.inputs(kind, test_idx, config.frame_stride))
        heads = {}
        for m in methods:
            if m == "majority":
                # ties go to the spontaneous class
                proba[m] = np.full(test_idx.size, float(np.mean(y_tr) >= 0.5))
            elif m in FUSION_METHODS:
                head = init_fusion_head(models, FUSION_METHODS[m])
                E_tr = np.hstack([emb_tr[c] for c in head.members])
                heads[m], _ = fit_head(head, E_tr, y_tr, config.train_for("fusion"),
                                       seed=fold_seed(seed, k, m))
                proba[m] = fusion_proba(heads[m], np.hstack([emb_te[c] for c in head.members]))
            acc = 100.0 * float(np.mean((proba[m] >= 0.5) == (y_te == 1)))
            results[m].accuracies.append(acc)
        log.info("fold %d/%d: %s", k, K, {m: r.accuracies[-1] for m, r in results.items()})
        if k == 1:
            first_fold = {"models": models, "heads": heads}
    if timing and methods:
        if dataset is None:
            raise InvalidArgument("timing needs raw sequences, not cached features")
        from .bench import bench_timing, method_pipelines

        pipes = method_pipelines(methods, first_fold["models"], first_fold["heads"], config)
        recs = dataset.records[: max(1, config.timing_sequences)]
        for m, ms in bench_timing(pipes, recs, config.timing_repeats).items():
            results[m].time_ms = ms
    return FoldReport(results, K, seed, fold_sizes, config.to_dict())
