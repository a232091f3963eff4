"""Reading and writing sequence data, and the per-family feature store.

A dataset directory looks like::

    manifest.csv          sequence_id,subject,label
    au/<sequence_id>.csv  frame,timestamp,AU01_r,...,AU45_r,smile_intensity
    deep/<sequence_id>.csv  sequence_id,frame,d000,d001,...   (optional)

AU files follow the OpenFace column naming; header cells are stripped, so
OpenFace's ``" AU12_r"`` style headers load as well.  Deep-feature files
hold one row per frame with externally computed descriptors.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..cache import CachedRecord, read_feature_cache, write_feature_cache
from ..classifier import KIND_FAMILY
from ..errors import DataError, InvalidArgument, LoadFailure, SchemaError
from ..features import LABELS, AUSignalSet, FeatureConfig, catalog_names, extract_all
from ..signal_core import TimeSeries
from .config import SchemaConfig

LABEL_VALUE = {"posed": 0, "spontaneous": 1, "unlabeled": -1}


@dataclass
class SequenceRecord:
    sequence_id: str
    subject: str
    label: str
    signals: AUSignalSet | None = None
    deep: np.ndarray | None = None  # (T, D) externally supplied frame features


@dataclass
class Dataset:
    records: list[SequenceRecord]
    # sequence id -> fold index 1..K, filled in by assign_folds
    folds: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        ids = [r.sequence_id for r in self.records]
        if len(set(ids)) != len(ids):
            raise InvalidArgument("sequence ids must be unique")

    def __len__(self):
        return len(self.records)

    @property
    def subjects(self) -> list[str]:
        return [r.subject for r in self.records]

    @property
    def labels(self) -> np.ndarray:
        return np.array([LABEL_VALUE[r.label] for r in self.records])

    @property
    def class_counts(self) -> dict[str, int]:
        return {lab: sum(r.label == lab for r in self.records) for lab in LABELS
                if any(r.label == lab for r in self.records)}


# -------------------------------------------------------------------- AU CSV


def _read_rows(path: Path) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise LoadFailure(f"cannot read {path}: {exc.strerror or exc}") from exc
    if not rows:
        raise SchemaError(f"{path}: empty file")
    return [h.strip() for h in rows[0]], rows[1:]


def load_au_csv(path, schema: SchemaConfig = SchemaConfig(),
                config: FeatureConfig = FeatureConfig(), sequence_id: str | None = None,
                label: str = "unlabeled", subject: str | None = None) -> AUSignalSet:
    """Parse one per-frame AU intensity file into a validated signal set.

    Raises
    ------
    SchemaError
        A required column is missing (the message names it).
    DataError
        NaN or unparsable cell, non-increasing or non-uniform timestamps;
        the message names the data row (0-based, header excluded).
    """
    path = Path(path)
    header, rows = _read_rows(path)
    col = {name: i for i, name in enumerate(header)}
    wanted = {au: schema.au_column(au) for au in config.au_names}
    wanted[config.smile_name] = schema.smile_column
    for needed in (schema.frame_column, schema.timestamp_column, *wanted.values()):
        if needed not in col:
            raise SchemaError(f"{path}: missing column {needed!r}")
    if not rows:
        raise DataError(f"{path}: no data rows")
    names = [schema.timestamp_column, *wanted.values()]
    data = np.empty((len(rows), len(names)))
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"{path}: row {r} has {len(row)} fields, header has {len(header)}")
        for j, name in enumerate(names):
            try:
                data[r, j] = float(row[col[name]])
            except ValueError:
                raise DataError(f"{path}: row {r}, column {name!r}: not a number") from None
    bad = np.argwhere(~np.isfinite(data))
    if bad.size:
        r, j = bad[0]
        raise DataError(f"{path}: row {r}, column {names[j]!r}: NaN or infinite value")
    t = data[:, 0]
    steps = np.diff(t)
    if np.any(steps <= 0):
        r = int(np.argmax(steps <= 0)) + 1
        kind = "duplicated" if steps[r - 1] == 0 else "decreasing"
        raise DataError(f"{path}: row {r}: {kind} timestamp {t[r]!r}")
    if schema.fps:
        fps = float(schema.fps)
    elif steps.size:
        # the span estimate is exact up to rounding; 6 decimals recover
        # nominal rates such as 50 or 29.97 bit for bit
        fps = round((t.size - 1) / float(t[-1] - t[0]), 6)
    else:
        raise DataError(f"{path}: a single row needs an explicit fps in the schema")
    series = {}
    try:
        for j, (sig, _) in enumerate(wanted.items(), start=1):
            series[sig] = TimeSeries(data[:, j], t, fps)
    except InvalidArgument as exc:
        raise DataError(f"{path}: {exc}") from exc
    return AUSignalSet(series, sequence_id or path.stem, label, subject)


def write_au_csv(path, aus: AUSignalSet, schema: SchemaConfig = SchemaConfig(),
                 config: FeatureConfig = FeatureConfig()) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = [schema.au_column(a) for a in config.au_names] + [schema.smile_column]
    sigs = [aus[a].values for a in config.signal_names]
    t = aus[config.signal_names[0]].timestamps
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([schema.frame_column, schema.timestamp_column, *cols])
        for i in range(aus.n_frames):
            w.writerow([i, repr(float(t[i]))] + [format(s[i], ".17g") for s in sigs])
    return path


# ------------------------------------------------------------------ deep CSV


def load_deep_csv(path) -> tuple[str, np.ndarray]:
    """Per-frame deep features: columns ``sequence_id, frame, <D feature columns>``."""
    path = Path(path)
    header, rows = _read_rows(path)
    if header[:2] != ["sequence_id", "frame"] or len(header) < 3:
        raise SchemaError(f"{path}: expected columns sequence_id, frame, then feature columns")
    if not rows:
        raise DataError(f"{path}: no data rows")
    sid = rows[0][0]
    out = np.empty((len(rows), len(header) - 2))
    for r, row in enumerate(rows):
        if len(row) != len(header) or row[0] != sid:
            raise DataError(f"{path}: row {r} is malformed or belongs to another sequence")
        if int(row[1]) != r:
            raise DataError(f"{path}: row {r}: frames out of order")
        try:
            out[r] = [float(x) for x in row[2:]]
        except ValueError:
            raise DataError(f"{path}: row {r}: not a number") from None
    if not np.all(np.isfinite(out)):
        raise DataError(f"{path}: row {int(np.argwhere(~np.isfinite(out))[0, 0])}: NaN value")
    return sid, out


def write_deep_csv(path, sequence_id: str, values: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sequence_id", "frame"] + [f"d{j:03d}" for j in range(values.shape[1])])
        for i, row in enumerate(values):
            w.writerow([sequence_id, i] + [format(x, ".17g") for x in row])
    return path


# --------------------------------------------------------- dataset directory


def write_dataset(dataset: Dataset, directory, schema: SchemaConfig = SchemaConfig(),
                  config: FeatureConfig = FeatureConfig()) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "manifest.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sequence_id", "subject", "label"])
        for rec in dataset.records:
            w.writerow([rec.sequence_id, rec.subject, rec.label])
    for rec in dataset.records:
        if rec.signals is not None:
            write_au_csv(directory / "au" / f"{rec.sequence_id}.csv", rec.signals, schema, config)
        if rec.deep is not None:
            write_deep_csv(directory / "deep" / f"{rec.sequence_id}.csv", rec.sequence_id, rec.deep)
    return directory


def load_dataset(directory, schema: SchemaConfig = SchemaConfig(),
                 config: FeatureConfig = FeatureConfig()) -> Dataset:
    """Read a dataset directory (see the module docstring for the layout)."""
    directory = Path(directory)
    manifest = directory / "manifest.csv"
    header, rows = _read_rows(manifest)
    if header[:3] != ["sequence_id", "subject", "label"]:
        raise SchemaError(f"{manifest}: expected columns sequence_id, subject, label")
    records = []
    for r, row in enumerate(rows):
        sid, subject, label = (x.strip() for x in row[:3])
        if label not in LABELS:
            raise DataError(f"{manifest}: row {r}: unknown label {label!r}")
        au_path = directory / "au" / f"{sid}.csv"
        signals = load_au_csv(au_path, schema, config, sid, label, subject) if au_path.exists() else None
        deep_path = directory / "deep" / f"{sid}.csv"
        deep = None
        if deep_path.exists():
            dsid, deep = load_deep_csv(deep_path)
            if dsid != sid:
                raise DataError(f"{deep_path}: holds sequence {dsid!r}, expected {sid!r}")
            if signals is not None and deep.shape[0] != signals.n_frames:
                raise DataError(f"{deep_path}: {deep.shape[0]} frames, AU file has {signals.n_frames}")
        if signals is None and deep is None:
            raise LoadFailure(f"{directory}: no AU or deep file for sequence {sid!r}")
        records.append(SequenceRecord(sid, subject, label, signals, deep))
    return Dataset(records)


# ------------------------------------------------------------ feature store


@dataclass
class FeatureStore:
    """Per-family features of a whole dataset, aligned with ``ids``.

    Vector families hold arrays of shape (F,), frame families (T, F).
    """

    ids: list[str]
    subjects: list[str]
    label_names: list[str]
    families: dict[str, list[np.ndarray]] = field(default_factory=dict)
    catalogs: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.ids)
        if len(self.subjects) != n or len(self.label_names) != n:
            raise InvalidArgument("ids, subjects and labels must align")
        for fam, vals in self.families.items():
            if len(vals) != n:
                raise InvalidArgument(f"family {fam!r} has {len(vals)} entries for {n} sequences")

    def __len__(self):
        return len(self.ids)

    @property
    def labels(self) -> np.ndarray:
        return np.array([LABEL_VALUE[lab] for lab in self.label_names])

    def inputs(self, kind: str, idx: Sequence[int] | None = None, stride: int = 1) -> list[np.ndarray]:
        """Model inputs of one kind; frame families are subsampled by ``stride``."""
        fam = KIND_FAMILY[kind]
        if fam not in self.families:
            raise InvalidArgument(f"no {fam} features available for {kind} models")
        vals = self.families[fam]
        idx = range(len(vals)) if idx is None else idx
        if kind in ("deep_frame", "auda_frame") and stride > 1:
            return [vals[i][::stride] for i in idx]
        return [vals[i] for i in idx]

    def write(self, directory) -> Path:
        for fam, vals in self.families.items():
            recs = [CachedRecord(s, sub, lab, v) for s, sub, lab, v
                    in zip(self.ids, self.subjects, self.label_names, vals)]
            write_feature_cache(directory, fam, self.catalogs[fam], recs)
        return Path(directory)

    @classmethod
    def read(cls, directory, families: Sequence[str] | None = None) -> "FeatureStore":
        directory = Path(directory)
        if families is None:
            families = sorted(p.name[: -len(".catalog.json")] for p in directory.glob("*.catalog.json"))
        if not families:
            raise LoadFailure(f"no feature cache found in {directory}")
        store = None
        for fam in families:
            names, recs = read_feature_cache(directory, fam)
            ids = [r.sequence_id for r in recs]
            if store is None:
                store = cls(ids, [r.subject for r in recs], [r.label for r in recs])
            elif ids != store.ids:
                raise LoadFailure(f"{directory}: family {fam!r} lists different sequences")
            store.families[fam] = [r.values for r in recs]
            store.catalogs[fam] = names
        return store


def extract_features(dataset: Dataset, config: FeatureConfig = FeatureConfig()) -> FeatureStore:
    """Compute every available family for every sequence."""
    recs = dataset.records
    store = FeatureStore([r.sequence_id for r in recs], [r.subject for r in recs],
                         [r.label for r in recs])
    if recs and all(r.signals is not None for r in recs):
        feats = [extract_all(r.signals, config) for r in recs]
        store.families["frame_wise"] = [f.frame_wise.values for f in feats]
        store.families["au_wise"] = [f.au_wise.values for f in feats]
        store.families["cross_au"] = [f.cross_au.values for f in feats]
        for fam in ("frame_wise", "au_wise", "cross_au"):
            store.catalogs[fam] = catalog_names(config, fam)
    if recs and all(r.deep is not None for r in recs):
        dims = {r.deep.shape[1] for r in recs}
        if len(dims) != 1:
            raise DataError(f"deep features disagree in width: {sorted(dims)}")
        store.families["deep_frame"] = [np.asarray(r.deep, dtype=float) for r in recs]
        store.catalogs["deep_frame"] = tuple(f"deep/d{j:03d}" for j in range(dims.pop()))
    return store
