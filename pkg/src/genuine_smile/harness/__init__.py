"""Data ingestion, synthetic data, K-fold evaluation, timing and the CLI."""
from .bench import bench_timing, extraction_pipelines, method_pipelines
from .config import METHODS, RunConfig, SchemaConfig, SynthParams, config_from_dict, load_config
from .crossval import FoldReport, MethodResult, assign_folds, kfold_evaluate
from .data import (
    Dataset,
    FeatureStore,
    SequenceRecord,
    extract_features,
    load_au_csv,
    load_dataset,
    load_deep_csv,
    write_au_csv,
    write_dataset,
    write_deep_csv,
)
from .synth import synth_generate

__all__ = [
    "bench_timing", "extraction_pipelines", "method_pipelines", "METHODS", "RunConfig",
    "SchemaConfig", "SynthParams", "config_from_dict", "load_config", "FoldReport",
    "MethodResult", "assign_folds", "kfold_evaluate", "Dataset", "FeatureStore",
    "SequenceRecord", "extract_features", "load_au_csv", "load_dataset", "load_deep_csv",
    "write_au_csv", "write_dataset", "write_deep_csv", "synth_generate",
]
