"""Per-sequence compute timing.

Pipelines take one :class:`SequenceRecord` and run everything a method needs
from raw signals to a probability.  Files are read and models loaded before
the clock starts.
"""
from __future__ import annotations

import time
from statistics import median
from typing import Callable, Mapping, Sequence

import numpy as np

from ..classifier import FusionHead, forward, fusion_proba
from ..errors import InvalidArgument
from ..features import analyse, au_wise_features, cross_au_features, frame_wise_features
from .config import RunConfig
from .data import SequenceRecord

Pipeline = Callable[[SequenceRecord], object]


def bench_timing(pipelines: Mapping[str, Pipeline], records: Sequence[SequenceRecord],
                 repeats: int = 20) -> dict[str, float]:
    """Median milliseconds per sequence for each pipeline.

    Each pipeline runs once untimed on each record, then ``repeats`` timed
    times; the per-record medians are summarised by their median.
    """
    if not records:
        raise InvalidArgument("timing needs at least one sequence")
    if repeats < 1:
        raise InvalidArgument("repeats must be >= 1")
    out = {}
    for name, fn in pipelines.items():
        per_record = []
        for rec in records:
            fn(rec)
            laps = []
            for _ in range(repeats):
                t0 = time.perf_counter()
                fn(rec)
                laps.append(time.perf_counter() - t0)
            per_record.append(median(laps))
        out[name] = 1e3 * median(per_record)
    return out


def extraction_pipelines(config: RunConfig = RunConfig()) -> dict[str, Pipeline]:
    """Feature extraction alone, one pipeline per family plus all at once."""
    fc = config.features

    def all_families(rec):
        an = analyse(rec.signals, fc)
        return frame_wise_features(an), au_wise_features(an), cross_au_features(an)

    return {
        "extract_frame_wise": lambda rec: frame_wise_features(rec.signals, fc),
        "extract_au_wise": lambda rec: au_wise_features(rec.signals, config=fc),
        "extract_cross_au": lambda rec: cross_au_features(rec.signals, config=fc),
        "extract_all": all_families,
    }


def _model_inputs(rec: SequenceRecord, kinds, config: RunConfig) -> dict[str, np.ndarray]:
    an = analyse(rec.signals, config.features) if set(kinds) - {"deep_frame"} else None
    out = {}
    for kind in kinds:
        if kind == "deep_frame":
            out[kind] = rec.deep[:: config.frame_stride]
        elif kind == "auda_frame":
            out[kind] = frame_wise_features(an).values[:: config.frame_stride]
        elif kind == "au_wise":
            out[kind] = au_wise_features(an).values
        else:
            out[kind] = cross_au_features(an).values
    return out


def method_pipelines(methods: Sequence[str], models: Mapping, heads: Mapping[str, FusionHead],
                     config: RunConfig = RunConfig()) -> dict[str, Pipeline]:
    """End-to-end pipelines (raw signals to probability) for trained methods."""
    pipes: dict[str, Pipeline] = {}
    for m in methods:
        if m == "majority":
            pipes[m] = lambda rec: 0.5
        elif m in models:
            def run(rec, kind=m):
                return forward(models[kind], _model_inputs(rec, [kind], config)[kind])[1]
            pipes[m] = run
        elif m in heads:
            def run(rec, head=heads[m]):
                xs = _model_inputs(rec, head.members, config)
                E = np.concatenate([forward(models[k], xs[k])[0] for k in head.members])
                return fusion_proba(head, E[None])[0]
            pipes[m] = run
        else:
            raise InvalidArgument(f"no trained model for method {m!r}")
    return pipes
