"""Run configuration: one JSON document covering features, models, training and folds.

Example::

    {
      "seed": 7,
      "folds": 10,
      "features": {"windows": [9, 27], "tau_rel": 0.1, "apex_ratio": 0.8},
      "model": {"hidden_dim": 64, "branch_dim": 128, "embedding_dim": 64},
      "train": {"learning_rate": 0.001, "momentum": 0.9, "batch_size": 32, "epochs": 100},
      "train_by_kind": {"fusion": {"learning_rate": 0.05}},
      "methods": ["au_wise", "fusion_all"]
    }

Keys left out keep their defaults; unknown keys are rejected.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from ..classifier import KINDS, ModelConfig, TrainConfig
from ..errors import InvalidArgument
from ..features import FeatureConfig
from ..phases import PhaseConfig

METHODS = ("majority",) + KINDS + ("fusion_auda", "fusion_all")
DEFAULT_METHODS = KINDS + ("fusion_auda", "fusion_all")


@dataclass(frozen=True)
class SchemaConfig:
    """Column names of the per-sequence AU CSV files."""

    frame_column: str = "frame"
    timestamp_column: str = "timestamp"
    au_suffix: str = "_r"
    smile_column: str = "smile_intensity"
    fps: float | None = None

    def au_column(self, au: str) -> str:
        return f"{au}{self.au_suffix}"


@dataclass(frozen=True)
class SynthParams:
    """Synthetic smile generator settings.

    Ranges are inclusive ``(low, high)`` frame counts or gains; each class has
    its own onset (rise) and apex ranges, the rest is shared.
    """

    fps: float = 50.0
    noise: float = 0.2  # std of additive Gaussian noise on every AU track
    deep_dim: int = 16
    deep_noise: float = 3.0
    lead: tuple[int, int] = (5, 12)
    tail: tuple[int, int] = (5, 12)
    fall: tuple[int, int] = (15, 30)
    rise_spontaneous: tuple[int, int] = (30, 45)
    rise_posed: tuple[int, int] = (8, 16)
    apex_spontaneous: tuple[int, int] = (35, 55)
    apex_posed: tuple[int, int] = (15, 30)
    height: tuple[float, float] = (2.5, 3.5)
    au6_gain_spontaneous: tuple[float, float] = (0.6, 0.9)
    au6_gain_posed: tuple[float, float] = (0.1, 0.3)
    au6_delay_spontaneous: tuple[int, int] = (2, 6)
    distractor_amplitude: float = 0.4

    def __post_init__(self):
        if self.fps <= 0 or self.noise < 0 or self.deep_noise < 0 or self.deep_dim < 0:
            raise InvalidArgument("fps must be positive; noise levels and deep_dim non-negative")
        for name in ("lead", "tail", "fall", "rise_spontaneous", "rise_posed",
                     "apex_spontaneous", "apex_posed", "height", "au6_gain_spontaneous",
                     "au6_gain_posed", "au6_delay_spontaneous"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 0:
                raise InvalidArgument(f"synth range {name} must satisfy 0 <= low <= high")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    folds: int = 10
    data: str | None = None
    features: FeatureConfig = field(default_factory=FeatureConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    # per-kind overrides of ``train``; key "fusion" covers fusion heads
    train_by_kind: dict = field(default_factory=dict)
    methods: tuple[str, ...] = DEFAULT_METHODS
    # frame models see every ``frame_stride``-th frame
    frame_stride: int = 1
    timing_sequences: int = 3
    timing_repeats: int = 20
    schema: SchemaConfig = field(default_factory=SchemaConfig)
    synth: SynthParams = field(default_factory=SynthParams)

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise InvalidArgument(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        bad = set(self.train_by_kind) - set(KINDS) - {"fusion"}
        if bad:
            raise InvalidArgument(f"train_by_kind has unknown keys {sorted(bad)}")
        if self.folds < 2:
            raise InvalidArgument("at least 2 folds are required")
        if self.frame_stride < 1:
            raise InvalidArgument("frame_stride must be >= 1")

    def train_for(self, kind: str) -> TrainConfig:
        return replace(self.train, **self.train_by_kind.get(kind, {}))

    def to_dict(self) -> dict:
        d = asdict(self)
        ph = d["features"].pop("phase")
        d["features"].update(tau_rel=ph["tau_rel"], apex_ratio=ph["apex_ratio"])
        for k, v in d["features"].items():
            if isinstance(v, tuple):
                d["features"][k] = list(v)
        d["methods"] = list(self.methods)
        return d


def _build(cls, raw: dict, where: str):
    if not isinstance(raw, dict):
        raise InvalidArgument(f"{where} must be an object")
    names = {f.name for f in fields(cls)}
    unknown = set(raw) - names
    if unknown:
        raise InvalidArgument(f"unknown keys in {where}: {sorted(unknown)}")
    try:
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()})
    except TypeError as exc:
        raise InvalidArgument(f"bad {where}: {exc}") from exc


def config_from_dict(raw: dict) -> RunConfig:
    raw = dict(raw)
    kw = {}
    feats = dict(raw.pop("features", {}))
    phase = {k: feats.pop(k) for k in ("tau_rel", "apex_ratio") if k in feats}
    kw["features"] = _build(FeatureConfig, feats, "features")
    kw["features"] = replace(kw["features"], phase=PhaseConfig(**phase))
    for key, cls in (("model", ModelConfig), ("train", TrainConfig), ("schema", SchemaConfig),
                     ("synth", SynthParams)):
        if key in raw:
            kw[key] = _build(cls, raw.pop(key), key)
    if "train_by_kind" in raw:
        tb = raw.pop("train_by_kind")
        allowed = {f.name for f in fields(TrainConfig)}
        for kind, over in tb.items():
            if not isinstance(over, dict) or set(over) - allowed:
                raise InvalidArgument(f"bad train_by_kind entry for {kind!r}")
        kw["train_by_kind"] = tb
    names = {f.name for f in fields(RunConfig)}
    unknown = set(raw) - names
    if unknown:
        raise InvalidArgument(f"unknown configuration keys: {sorted(unknown)}")
    kw.update(raw)
    if "methods" in kw:
        kw["methods"] = tuple(kw["methods"])
    return RunConfig(**kw)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise InvalidArgument(f"configuration file not found: {path}") from None
    except ValueError as exc:
        raise InvalidArgument(f"configuration file {path} is not valid JSON: {exc}") from exc
    return config_from_dict(raw)


# Reduced model size and epoch budget used by the acceptance suite and
# ``configs/acceptance.json``: a full 10-fold run over 200 synthetic
# sequences then takes roughly a minute on one CPU core.
ACCEPTANCE = {
    "seed": 7,
    "folds": 10,
    "model": {"hidden_dim": 32, "branch_dim": 64, "embedding_dim": 32},
    "train": {"learning_rate": 0.01, "momentum": 0.9, "batch_size": 32, "epochs": 40},
    "train_by_kind": {
        "deep_frame": {"batch_size": 16, "epochs": 15},
        "auda_frame": {"batch_size": 16, "epochs": 15},
        "fusion": {"learning_rate": 0.05, "epochs": 50},
    },
    "frame_stride": 2,
    "methods": ["majority", "deep_frame", "auda_frame", "au_wise", "cross_au",
                "fusion_auda", "fusion_all"],
}
