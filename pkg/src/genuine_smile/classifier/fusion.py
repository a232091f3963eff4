"""Late fusion: one dense sigmoid layer over concatenated model embeddings."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import expit

from ..errors import InvalidArgument, NumericFailure
from .model import (
    KINDS,
    Prediction,
    SequenceModel,
    TrainConfig,
    bce_with_logits,
    embed,
    forward,
    model_hash,
    sgd_epochs,
)

# concatenation order of the contributing embeddings
FUSION_ORDER = KINDS
AUDA_KINDS = ("auda_frame", "au_wise", "cross_au")


@dataclass
class FusionHead:
    members: tuple[str, ...]
    dims: tuple[int, ...]
    params: dict[str, np.ndarray]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.members = tuple(self.members)
        self.dims = tuple(int(d) for d in self.dims)
        if not self.members or len(set(self.members)) != len(self.members):
            raise InvalidArgument("fusion members must be distinct and non-empty")
        if any(m not in FUSION_ORDER for m in self.members):
            raise InvalidArgument(f"unknown fusion member in {self.members}")
        if list(self.members) != sorted(self.members, key=FUSION_ORDER.index):
            raise InvalidArgument(f"fusion members must follow the order {FUSION_ORDER}")
        if len(self.dims) != len(self.members):
            raise InvalidArgument("one embedding dim per member is required")
        self.params = {k: np.ascontiguousarray(v, dtype=float) for k, v in self.params.items()}
        if self.params["w"].shape != (self.input_dim,) or self.params["b"].shape != (1,):
            raise InvalidArgument(
                f"head weights {self.params['w'].shape} do not match input dim {self.input_dim}"
            )

    @property
    def input_dim(self) -> int:
        return sum(self.dims)

    def copy(self) -> "FusionHead":
        return copy.deepcopy(self)


def _ordered(models) -> dict[str, SequenceModel]:
    if isinstance(models, Mapping):
        return dict(models)
    return {m.kind: m for m in models}


def init_fusion_head(models, members: Sequence[str] = FUSION_ORDER) -> FusionHead:
    """Zero-initialised head over the embeddings of ``members``."""
    models = _ordered(models)
    members = [k for k in FUSION_ORDER if k in members]
    missing = [k for k in members if k not in models]
    if missing:
        raise InvalidArgument(f"no model for fusion member(s) {missing}")
    dims = [models[k].embedding_dim for k in members]
    return FusionHead(tuple(members), tuple(dims), {"w": np.zeros(sum(dims)), "b": np.zeros(1)})


def _check_members(head: FusionHead, models: Mapping[str, SequenceModel]):
    for k, d in zip(head.members, head.dims):
        if k not in models:
            raise InvalidArgument(f"fusion head needs a {k} model")
        if models[k].embedding_dim != d:
            raise InvalidArgument(
                f"{k} model embeds to {models[k].embedding_dim} dims, head expects {d}"
            )


def fused_embedding(head: FusionHead, models, inputs: Mapping) -> np.ndarray:
    models = _ordered(models)
    _check_members(head, models)
    parts = []
    for k in head.members:
        if k not in inputs:
            raise InvalidArgument(f"no input for fusion member {k}")
        emb, _ = forward(models[k], inputs[k])
        parts.append(emb)
    return np.concatenate(parts)


def fuse_forward(head: FusionHead, models, inputs: Mapping) -> Prediction:
    """Prediction of the fusion head for one sequence.

    ``inputs`` maps each member kind to that model's input.
    """
    z = fused_embedding(head, models, inputs) @ head.params["w"] + head.params["b"][0]
    if not np.isfinite(z):
        raise NumericFailure("non-finite fusion logit")
    return Prediction(float(expit(z)))


def stacked_embeddings(head: FusionHead, models, inputs: Mapping[str, Sequence]) -> np.ndarray:
    """Concatenated embeddings of many sequences, shape (N, head.input_dim)."""
    models = _ordered(models)
    _check_members(head, models)
    lengths = {len(inputs[k]) for k in head.members}
    if len(lengths) != 1:
        raise InvalidArgument("every fusion member needs the same number of inputs")
    return np.hstack([embed(models[k], inputs[k]) for k in head.members])


def fusion_proba(head: FusionHead, embeddings: np.ndarray) -> np.ndarray:
    return expit(embeddings @ head.params["w"] + head.params["b"][0])


def fit_head(head: FusionHead, embeddings: np.ndarray, labels,
             hyperparams: TrainConfig = TrainConfig(), seed: int = 0):
    """Fit a copy of ``head`` on precomputed member embeddings, shape (N, head.input_dim)."""
    labels = np.asarray(labels, dtype=float)
    E = np.asarray(embeddings, dtype=float)
    if labels.size == 0:
        raise InvalidArgument("cannot train on an empty dataset")
    if E.shape != (labels.size, head.input_dim):
        raise InvalidArgument(
            f"embeddings of shape {E.shape} do not fit {labels.size} labels and head dim {head.input_dim}"
        )
    head = head.copy()
    p = head.params

    def grad_fn(idx):
        logits = E[idx] @ p["w"] + p["b"][0]
        loss, dz = bce_with_logits(logits, labels[idx])
        return loss, {"w": E[idx].T @ dz, "b": np.array([dz.sum()])}, logits

    def on_nan(epoch):
        raise NumericFailure(f"fusion head training diverged in epoch {epoch}")

    history: list[dict] = []
    sgd_epochs(p, grad_fn, labels.size, labels, hyperparams, seed, on_nan, history)
    head.metadata = dict(head.metadata, train_seed=seed, hyperparams=vars(hyperparams).copy())
    return head, history


def train_fusion_head(head: FusionHead, models, inputs: Mapping[str, Sequence], labels,
                      hyperparams: TrainConfig = TrainConfig(), seed: int = 0):
    """Fit only the head on frozen model embeddings.

    Returns the trained copy of the head and the per-epoch history.  The
    contributing models are read, never written; their hashes are checked.
    """
    models = _ordered(models)
    before = {k: model_hash(models[k]) for k in head.members if k in models}
    E = stacked_embeddings(head, models, inputs)
    head, history = fit_head(head, E, labels, hyperparams, seed)
    after = {k: model_hash(models[k]) for k in before}
    if after != before:
        raise RuntimeError("a contributing model changed during fusion training")
    head.metadata["member_hashes"] = before
    return head, history
