"""On-disk feature cache.

Each family lives in ``<dir>/<family>.csv`` with a sidecar
``<dir>/<family>.catalog.json``.  Vector families hold one row per sequence;
per-frame families (``frame_wise``, ``deep_frame``) hold one row per frame
with an extra ``frame`` column.  Floats are written with 17 significant
digits, so a write/read cycle reproduces every value bit for bit.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import DataError, LoadFailure
from .features import catalog_hash

FRAME_FAMILIES = ("frame_wise", "deep_frame")
META_COLUMNS = ("sequence_id", "subject", "label", "family", "catalog_hash")
CACHE_VERSION = 1


@dataclass
class CachedRecord:
    sequence_id: str
    subject: str
    label: str
    values: np.ndarray


def _fmt(row) -> list[str]:
    return [format(x, ".17g") for x in row.tolist()]


def write_feature_cache(directory, family: str, catalog, records: Iterable[CachedRecord]) -> Path:
    """Write one family's records; returns the CSV path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    catalog = tuple(catalog)
    digest = catalog_hash(catalog)
    per_frame = family in FRAME_FAMILIES
    path = directory / f"{family}.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(META_COLUMNS + (("frame",) if per_frame else ()) + catalog)
        for rec in records:
            meta = [rec.sequence_id, rec.subject, rec.label, family, digest]
            vals = np.asarray(rec.values, dtype=float)
            if per_frame:
                if vals.ndim != 2 or vals.shape[1] != len(catalog):
                    raise DataError(f"{rec.sequence_id}: frame matrix {vals.shape} does not fit catalog")
                for i, row in enumerate(vals):
                    w.writerow(meta + [str(i)] + _fmt(row))
            else:
                if vals.shape != (len(catalog),):
                    raise DataError(f"{rec.sequence_id}: vector {vals.shape} does not fit catalog")
                w.writerow(meta + _fmt(vals))
    sidecar = {
        "version": CACHE_VERSION,
        "family": family,
        "catalog_hash": digest,
        "n_features": len(catalog),
        "names": list(catalog),
    }
    (directory / f"{family}.catalog.json").write_text(json.dumps(sidecar, indent=1))
    return path


def read_feature_cache(directory, family: str) -> tuple[tuple[str, ...], list[CachedRecord]]:
    """Read one family back; records keep their on-disk order."""
    directory = Path(directory)
    path = directory / f"{family}.csv"
    side = directory / f"{family}.catalog.json"
    try:
        meta = json.loads(side.read_text())
        fh = open(path, newline="")
    except (OSError, ValueError) as exc:
        raise LoadFailure(f"cannot read {family} cache in {directory}: {exc}") from exc
    names = tuple(meta["names"])
    digest = catalog_hash(names)
    if digest != meta.get("catalog_hash"):
        raise LoadFailure(f"{side}: catalog hash mismatch")
    per_frame = family in FRAME_FAMILIES
    n_meta = len(META_COLUMNS) + per_frame
    records: dict[str, CachedRecord] = {}
    rows: dict[str, list[list[float]]] = {}
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header[n_meta:]) != names:
            raise LoadFailure(f"{path}: header does not match the catalog sidecar")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise LoadFailure(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            sid, subject, label, fam, h = row[:5]
            if fam != family or h != digest:
                raise LoadFailure(f"{path}:{lineno}: record belongs to another catalog")
            try:
                vals = [float(x) for x in row[n_meta:]]
            except ValueError as exc:
                raise LoadFailure(f"{path}:{lineno}: {exc}") from exc
            if sid not in records:
                records[sid] = CachedRecord(sid, subject, label, None)
                rows[sid] = []
            if per_frame and int(row[5]) != len(rows[sid]):
                raise LoadFailure(f"{path}:{lineno}: frames of {sid!r} out of order")
            rows[sid].append(vals)
    for sid, rec in records.items():
        arr = np.array(rows[sid], dtype=float)
        rec.values = arr if per_frame else arr[0]
        if not per_frame and len(rows[sid]) != 1:
            raise LoadFailure(f"{path}: duplicate record for {sid!r}")
    return names, list(records.values())
