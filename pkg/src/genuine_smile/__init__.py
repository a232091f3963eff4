"""Smile genuineness (spontaneous vs posed) from facial action-unit intensity dynamics.

Subpackages and modules
-----------------------
signal_core  sliding-window regression dynamics of one time series
phases       onset / apex / offset segmentation of the smile
features     frame-wise, AU-wise and cross-AU feature families
cache        on-disk feature cache
classifier   LSTM and dense classifiers, late fusion, model files
harness      data loading, synthetic data, K-fold evaluation, timing, CLI
"""
from .errors import (
    DataError,
    InsufficientData,
    InvalidArgument,
    LoadFailure,
    NumericFailure,
    SchemaError,
    SmileError,
    VersionMismatch,
)
from .features import (
    AUSignalSet,
    FeatureConfig,
    au_wise_features,
    cross_au_features,
    extract_all,
    frame_wise_features,
)
from .phases import PhaseConfig, segment_phases
from .signal_core import TimeSeries, compute_dynamics

__version__ = "0.1.0"
