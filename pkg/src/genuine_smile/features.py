"""Frame-wise, AU-wise and cross-AU feature families.

Feature names follow ``family/[phase/]subject/descriptor``, for example
``frame_wise/AU12/adjusted_w9``, ``au_wise/onset/AU06/mean_adjusted`` or
``cross_au/apex/AU06~AU12/rise_lag``.  Cross-AU pairs are always ordered by
AU name, so sign-carrying descriptors (lags, extrema differences) have a
fixed orientation regardless of the order signals arrive in.

Statistics over an empty phase are 0.
"""
from __future__ import annotations

import hashlib
from functools import lru_cache
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterator, Mapping

import numpy as np

from .errors import InsufficientData, InvalidArgument
from .phases import PHASE_NAMES, PhaseConfig, PhaseSegmentation, segment_phases
from .signal_core import DEFAULT_WINDOWS, DynamicsBundle, TimeSeries, compute_dynamics

# the AU intensity outputs of OpenFace
OPENFACE_AUS = (
    "AU01", "AU02", "AU04", "AU05", "AU06", "AU07", "AU09", "AU10", "AU12",
    "AU14", "AU15", "AU17", "AU20", "AU23", "AU25", "AU26", "AU45",
)
SMILE = "smile_intensity"
LABELS = ("posed", "spontaneous", "unlabeled")
FAMILIES = ("frame_wise", "au_wise", "cross_au")

FRAME_DESCRIPTORS = ("value", "slope", "coeff", "adjusted", "second_order")
# descriptors that are emitted once per window size
PER_WINDOW = ("slope", "coeff", "adjusted")
AU_DESCRIPTORS = (
    "mean_adjusted", "max_adjusted", "min_adjusted", "mean_second_order",
    "mean_value", "amplitude", "duration_ratio",
)
CROSS_DESCRIPTORS = (
    "mean_delta_diff", "max_delta_diff", "std_delta_diff", "slope_corr",
    "rise_lag", "fall_lag", "max_adjusted_diff", "min_adjusted_diff",
)

_FLAT_RTOL = (64 * np.finfo(float).eps) ** 2


@dataclass(frozen=True)
class FeatureConfig:
    au_names: tuple[str, ...] = OPENFACE_AUS
    smile_name: str = SMILE
    windows: tuple[int, ...] = DEFAULT_WINDOWS
    second_order_window: int | None = None
    phase: PhaseConfig = field(default_factory=PhaseConfig)
    phases: tuple[str, ...] = PHASE_NAMES
    frame_descriptors: tuple[str, ...] = FRAME_DESCRIPTORS
    au_descriptors: tuple[str, ...] = AU_DESCRIPTORS
    cross_descriptors: tuple[str, ...] = CROSS_DESCRIPTORS

    def __post_init__(self):
        object.__setattr__(self, "au_names", tuple(self.au_names))
        object.__setattr__(self, "windows", tuple(sorted(self.windows)))
        for name, allowed in (
            ("phases", PHASE_NAMES),
            ("frame_descriptors", FRAME_DESCRIPTORS),
            ("au_descriptors", AU_DESCRIPTORS),
            ("cross_descriptors", CROSS_DESCRIPTORS),
        ):
            chosen = tuple(getattr(self, name))
            object.__setattr__(self, name, chosen)
            unknown = set(chosen) - set(allowed)
            if unknown:
                raise InvalidArgument(f"unknown {name}: {sorted(unknown)}")
        if len(set(self.au_names)) != len(self.au_names):
            raise InvalidArgument("duplicate AU names")
        if self.smile_name in self.au_names:
            raise InvalidArgument("smile signal name collides with an AU name")
        if not self.windows:
            raise InvalidArgument("at least one window is required")

    @property
    def signal_names(self) -> tuple[str, ...]:
        return self.au_names + (self.smile_name,)

    @property
    def sorted_aus(self) -> tuple[str, ...]:
        return tuple(sorted(self.au_names))

    @property
    def pairs(self) -> list[tuple[str, str]]:
        return list(combinations(self.sorted_aus, 2))


@dataclass(frozen=True)
class AUSignalSet:
    """All input signals of one smile sequence, sharing one time axis."""

    signals: Mapping[str, TimeSeries]
    sequence_id: str = ""
    label: str = "unlabeled"
    subject: str | None = None

    def __post_init__(self):
        if not self.signals:
            raise InvalidArgument("a signal set needs at least one signal")
        if self.label not in LABELS:
            raise InvalidArgument(f"label must be one of {LABELS}, got {self.label!r}")
        first = next(iter(self.signals.values()))
        for name, s in self.signals.items():
            if len(s) != len(first) or s.fps != first.fps or not np.array_equal(
                s.timestamps, first.timestamps
            ):
                raise InvalidArgument(f"signal {name!r} does not share the common time axis")
        object.__setattr__(self, "signals", dict(self.signals))

    @property
    def n_frames(self) -> int:
        return len(next(iter(self.signals.values())))

    @property
    def fps(self) -> float:
        return next(iter(self.signals.values())).fps

    def __getitem__(self, name: str) -> TimeSeries:
        try:
            return self.signals[name]
        except KeyError:
            raise InvalidArgument(f"sequence {self.sequence_id!r} has no signal {name!r}") from None


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    family: str
    phase: str | None
    subject: str
    descriptor: str


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    catalog: tuple[str, ...]
    family: str

    def __post_init__(self):
        if self.values.shape != (len(self.catalog),):
            raise InvalidArgument(
                f"{self.values.shape[0]} values for a catalog of {len(self.catalog)} names"
            )

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.catalog, self.values.tolist()))


@dataclass(frozen=True)
class FeatureMatrix:
    """Frame-wise features, one row per frame."""

    values: np.ndarray
    catalog: tuple[str, ...]
    family: str = "frame_wise"

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != len(self.catalog):
            raise InvalidArgument(
                f"matrix of shape {self.values.shape} does not fit a catalog of {len(self.catalog)} names"
            )

    @property
    def dims(self) -> tuple[int, int]:
        return self.values.shape

    def row(self, i: int) -> FeatureVector:
        return FeatureVector(self.values[i], self.catalog, self.family)

    def rows(self) -> Iterator[FeatureVector]:
        for i in range(self.values.shape[0]):
            yield self.row(i)


# ------------------------------------------------------------------ catalog


def _frame_columns(config: FeatureConfig) -> list[tuple[str, int | None]]:
    chosen = config.frame_descriptors
    cols = [("value", None)] if "value" in chosen else []
    for w in config.windows:
        cols.extend((d, w) for d in PER_WINDOW if d in chosen)
    if "second_order" in chosen:
        cols.append(("second_order", None))
    return cols


def _column_name(desc: str, window: int | None) -> str:
    return desc if window is None else f"{desc}_w{window}"


def feature_catalog(config: FeatureConfig = FeatureConfig(), family: str | None = None) -> list[CatalogEntry]:
    """Ordered catalog of every feature, optionally restricted to one family."""
    out = []
    if family in (None, "frame_wise"):
        for sig in config.signal_names:
            for d, w in _frame_columns(config):
                cname = _column_name(d, w)
                out.append(CatalogEntry(f"frame_wise/{sig}/{cname}", "frame_wise", None, sig, cname))
    if family in (None, "au_wise"):
        for ph in config.phases:
            for au in config.au_names:
                for d in config.au_descriptors:
                    out.append(CatalogEntry(f"au_wise/{ph}/{au}/{d}", "au_wise", ph, au, d))
    if family in (None, "cross_au"):
        for ph in config.phases:
            for a, b in config.pairs:
                for d in config.cross_descriptors:
                    pair = f"{a}~{b}"
                    out.append(CatalogEntry(f"cross_au/{ph}/{pair}/{d}", "cross_au", ph, pair, d))
    if family not in (None,) + FAMILIES:
        raise InvalidArgument(f"unknown feature family {family!r}")
    return out


@lru_cache(maxsize=32)
def catalog_names(config: FeatureConfig, family: str) -> tuple[str, ...]:
    return tuple(e.name for e in feature_catalog(config, family))


def catalog_hash(names) -> str:
    return hashlib.sha256("\n".join(names).encode()).hexdigest()[:16]


# --------------------------------------------------------------- extraction


@dataclass(frozen=True)
class SequenceAnalysis:
    """Dynamics and phases of one sequence, shared by all three families."""

    aus: AUSignalSet
    config: FeatureConfig
    dynamics: dict[str, DynamicsBundle]
    phases: PhaseSegmentation


def analyse(aus: AUSignalSet, config: FeatureConfig = FeatureConfig()) -> SequenceAnalysis:
    """Compute dynamics of every configured signal and segment the smile."""
    longest = max(config.windows)
    if aus.n_frames < longest:
        raise InsufficientData(
            f"sequence {aus.sequence_id!r} has {aus.n_frames} frames, fewer than the window {longest}"
        )
    dyn = {
        name: compute_dynamics(aus[name], config.windows, config.second_order_window)
        for name in config.signal_names
    }
    smile = config.smile_name
    phases = segment_phases(dyn[smile], aus[smile], config.phase)
    return SequenceAnalysis(aus, config, dyn, phases)


def _coerce(aus, phases, config) -> SequenceAnalysis:
    an = aus if isinstance(aus, SequenceAnalysis) else analyse(aus, config)
    if phases is not None and phases != an.phases:
        an = SequenceAnalysis(an.aus, an.config, an.dynamics, phases)
    return an


def frame_wise_features(aus, config: FeatureConfig = FeatureConfig()) -> FeatureMatrix:
    """Per-frame descriptor rows for every signal (values, dynamics, second order)."""
    an = aus if isinstance(aus, SequenceAnalysis) else analyse(aus, config)
    config = an.config
    columns = []
    for sig in config.signal_names:
        b = an.dynamics[sig]
        for d, w in _frame_columns(config):
            if d == "value":
                columns.append(an.aus[sig].values)
            elif d == "second_order":
                columns.append(b.second_order.slope)
            else:
                columns.append(getattr(b[w], d))
    values = np.column_stack(columns)
    return FeatureMatrix(values, catalog_names(config, "frame_wise"))


def _stack(an: SequenceAnalysis, names, attr) -> np.ndarray:
    w = min(an.config.windows)
    if attr == "value":
        return np.stack([an.aus[n].values for n in names])
    if attr == "second_order":
        return np.stack([an.dynamics[n].second_order.slope for n in names])
    return np.stack([getattr(an.dynamics[n][w], attr) for n in names])


def au_wise_features(aus, phases: PhaseSegmentation | None = None,
                     config: FeatureConfig = FeatureConfig()) -> FeatureVector:
    """Per-AU statistics of the dynamics inside each phase."""
    an = _coerce(aus, phases, config)
    config = an.config
    names = config.au_names
    adj = _stack(an, names, "adjusted")
    so = _stack(an, names, "second_order")
    val = _stack(an, names, "value")
    n = an.aus.n_frames
    blocks = []
    for ph in config.phases:
        s, e = an.phases.phases()[ph]
        if e <= s:
            blocks.append(np.zeros((len(names), len(config.au_descriptors))))
            continue
        a, q, v = adj[:, s:e], so[:, s:e], val[:, s:e]
        stats = {
            "mean_adjusted": a.mean(axis=1),
            "max_adjusted": a.max(axis=1),
            "min_adjusted": a.min(axis=1),
            "mean_second_order": q.mean(axis=1),
            "mean_value": v.mean(axis=1),
            "amplitude": v.max(axis=1) - v.min(axis=1),
            "duration_ratio": np.full(len(names), (e - s) / n),
        }
        blocks.append(np.column_stack([stats[d] for d in config.au_descriptors]))
    values = np.concatenate([b.ravel() for b in blocks])
    return FeatureVector(values, catalog_names(config, "au_wise"), "au_wise")


def _pair_corr(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row-wise Pearson correlation; 0 where either row is constant."""
    dx = x - x.mean(axis=1, keepdims=True)
    dy = y - y.mean(axis=1, keepdims=True)
    sxx = np.einsum("ij,ij->i", dx, dx)
    syy = np.einsum("ij,ij->i", dy, dy)
    sxy = np.einsum("ij,ij->i", dx, dy)
    flat = (sxx <= _FLAT_RTOL * np.einsum("ij,ij->i", x, x)) | (
        syy <= _FLAT_RTOL * np.einsum("ij,ij->i", y, y)
    )
    with np.errstate(invalid="ignore", divide="ignore"):
        r = sxy / (np.sqrt(sxx) * np.sqrt(syy))
    r[flat] = 0.0
    return np.clip(r, -1.0, 1.0)


def cross_au_features(aus, phases: PhaseSegmentation | None = None,
                      config: FeatureConfig = FeatureConfig()) -> FeatureVector:
    """Relational statistics of every AU pair inside each phase."""
    an = _coerce(aus, phases, config)
    config = an.config
    order = config.sorted_aus
    index = {n: i for i, n in enumerate(order)}
    pairs = config.pairs
    ia = np.array([index[a] for a, _ in pairs], dtype=int)
    ib = np.array([index[b] for _, b in pairs], dtype=int)
    slope = _stack(an, order, "slope")
    adj = _stack(an, order, "adjusted")
    fps = an.aus.fps
    n_desc = len(config.cross_descriptors)
    blocks = []
    for ph in config.phases:
        s, e = an.phases.phases()[ph]
        if e <= s or not pairs:
            blocks.append(np.zeros((len(pairs), n_desc)))
            continue
        da, db = slope[ia, s:e], slope[ib, s:e]
        diff = np.abs(da - db)
        argmax = np.argmax(adj[:, s:e], axis=1)
        argmin = np.argmin(adj[:, s:e], axis=1)
        amax = adj[:, s:e].max(axis=1)
        amin = adj[:, s:e].min(axis=1)
        stats = {
            "mean_delta_diff": diff.mean(axis=1),
            "max_delta_diff": diff.max(axis=1),
            "std_delta_diff": diff.std(axis=1),
            "slope_corr": _pair_corr(da, db),
            "rise_lag": (argmax[ia] - argmax[ib]) / fps,
            "fall_lag": (argmin[ia] - argmin[ib]) / fps,
            "max_adjusted_diff": amax[ia] - amax[ib],
            "min_adjusted_diff": amin[ia] - amin[ib],
        }
        blocks.append(np.column_stack([stats[d] for d in config.cross_descriptors]))
    values = np.concatenate([b.ravel() for b in blocks])
    return FeatureVector(values, catalog_names(config, "cross_au"), "cross_au")


@dataclass(frozen=True)
class SequenceFeatures:
    frame_wise: FeatureMatrix
    au_wise: FeatureVector
    cross_au: FeatureVector
    phases: PhaseSegmentation


def extract_all(aus: AUSignalSet, config: FeatureConfig = FeatureConfig()) -> SequenceFeatures:
    """All three families from one shared analysis pass."""
    an = analyse(aus, config)
    return SequenceFeatures(
        frame_wise_features(an), au_wise_features(an), cross_au_features(an), an.phases
    )

