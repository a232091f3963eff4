"""From-scratch LSTM / dense classifiers and late fusion."""
from .fusion import (
    AUDA_KINDS,
    FUSION_ORDER,
    FusionHead,
    fit_head,
    fuse_forward,
    fusion_proba,
    init_fusion_head,
    stacked_embeddings,
    train_fusion_head,
)
from .io import load_model, save_model
from .lstm import LSTMParams, lstm_step
from .model import (
    FRAME_KINDS,
    KIND_FAMILY,
    KINDS,
    ModelConfig,
    Prediction,
    SequenceModel,
    TrainConfig,
    embed,
    forward,
    gradient_check,
    init_model,
    model_hash,
    predict_proba,
    train,
)

__all__ = [
    "AUDA_KINDS", "FUSION_ORDER", "FusionHead", "fit_head", "fuse_forward", "fusion_proba",
    "init_fusion_head", "stacked_embeddings", "train_fusion_head", "load_model",
    "save_model", "LSTMParams", "lstm_step", "FRAME_KINDS", "KIND_FAMILY", "KINDS",
    "ModelConfig", "Prediction", "SequenceModel", "TrainConfig", "embed", "forward",
    "gradient_check", "init_model", "model_hash", "predict_proba", "train",
]
