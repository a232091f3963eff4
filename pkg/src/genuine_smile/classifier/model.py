"""Sequence and phase-wise classifiers with a dense final branch and sigmoid head.

Frame kinds (``deep_frame``, ``auda_frame``) run an LSTM over per-frame
vectors and feed its last hidden state to the final branch; phase-wise kinds
(``au_wise``, ``cross_au``) feed their feature vector to the final branch
directly.  The final branch is two tanh dense layers ending in an embedding
of size ``embedding_dim``; a single dense sigmoid unit turns the embedding
into p(spontaneous).
"""
from __future__ import annotations

import copy
import hashlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from ..errors import InvalidArgument, NumericFailure
from ..features import FeatureMatrix, FeatureVector
from .lstm import LSTMParams, lstm_backward, lstm_forward

KINDS = ("deep_frame", "auda_frame", "au_wise", "cross_au")
FRAME_KINDS = ("deep_frame", "auda_frame")
# feature family each model kind consumes
KIND_FAMILY = {
    "deep_frame": "deep_frame",
    "auda_frame": "frame_wise",
    "au_wise": "au_wise",
    "cross_au": "cross_au",
}
LSTM_KEYS = ("lstm_Wx", "lstm_Wh", "lstm_b")
BRANCH_KEYS = ("branch_W1", "branch_b1", "branch_W2", "branch_b2")
HEAD_KEYS = ("head_w", "head_b")


@dataclass(frozen=True)
class ModelConfig:
    hidden_dim: int = 64
    branch_dim: int = 128
    embedding_dim: int = 64

    def __post_init__(self):
        if min(self.hidden_dim, self.branch_dim, self.embedding_dim) <= 0:
            raise InvalidArgument("model dimensions must be positive")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 32
    epochs: int = 100

    def __post_init__(self):
        if self.learning_rate < 0 or not 0 <= self.momentum < 1:
            raise InvalidArgument("learning rate must be >= 0 and momentum in [0, 1)")
        if self.batch_size < 1 or self.epochs < 0:
            raise InvalidArgument("batch size must be >= 1 and epochs >= 0")


@dataclass(frozen=True)
class Prediction:
    probability: float

    @property
    def decision(self) -> bool:
        """True when the smile is judged spontaneous."""
        return self.probability >= 0.5


@dataclass
class SequenceModel:
    kind: str
    input_dim: int
    params: dict[str, np.ndarray]
    # per-feature standardisation, fitted on the training data
    in_mean: np.ndarray
    in_scale: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgument(f"unknown model kind {self.kind!r}")
        self.params = {k: np.ascontiguousarray(v, dtype=float) for k, v in self.params.items()}
        expected = (LSTM_KEYS if self.is_frame else ()) + BRANCH_KEYS + HEAD_KEYS
        if set(self.params) != set(expected):
            raise InvalidArgument(f"{self.kind} model needs parameters {expected}")
        if self.params["head_w"].shape[0] != self.embedding_dim:
            raise InvalidArgument("head input dim must equal the embedding dim")
        if self.is_frame:
            LSTMParams(*(self.params[k] for k in LSTM_KEYS))

    @property
    def is_frame(self) -> bool:
        return self.kind in FRAME_KINDS

    @property
    def family(self) -> str:
        return KIND_FAMILY[self.kind]

    @property
    def embedding_dim(self) -> int:
        return self.params["branch_W2"].shape[1]

    @property
    def lstm(self) -> LSTMParams | None:
        if not self.is_frame:
            return None
        return LSTMParams(*(self.params[k] for k in LSTM_KEYS))

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params.values())

    def copy(self) -> "SequenceModel":
        return copy.deepcopy(self)


def _glorot(rng, fan_in, fan_out):
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=(fan_in, fan_out))


def init_model(kind: str, input_dim: int, config: ModelConfig = ModelConfig(),
               seed: int = 0) -> SequenceModel:
    """Randomly initialised model; the head starts at zero (p = 0.5)."""
    if kind not in KINDS:
        raise InvalidArgument(f"unknown model kind {kind!r}")
    rng = np.random.default_rng(seed)
    params = {}
    branch_in = input_dim
    if kind in FRAME_KINDS:
        lp = LSTMParams.init(input_dim, config.hidden_dim, rng)
        params.update(lstm_Wx=lp.Wx, lstm_Wh=lp.Wh, lstm_b=lp.b)
        branch_in = config.hidden_dim
    params["branch_W1"] = _glorot(rng, branch_in, config.branch_dim)
    params["branch_b1"] = np.zeros(config.branch_dim)
    params["branch_W2"] = _glorot(rng, config.branch_dim, config.embedding_dim)
    params["branch_b2"] = np.zeros(config.embedding_dim)
    params["head_w"] = np.zeros(config.embedding_dim)
    params["head_b"] = np.zeros(1)
    meta = {"seed": seed, "model_config": vars(config).copy()}
    return SequenceModel(kind, input_dim, params, np.zeros(input_dim), np.ones(input_dim), meta)


def model_hash(model) -> str:
    """Digest of every array a model carries (parameters and normalisation)."""
    h = hashlib.sha256()
    arrays = dict(model.params)
    if isinstance(model, SequenceModel):
        arrays["in_mean"], arrays["in_scale"] = model.in_mean, model.in_scale
    for k in sorted(arrays):
        a = np.ascontiguousarray(arrays[k], dtype=float)
        h.update(k.encode())
        h.update(repr(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()


# ------------------------------------------------------------------- inputs


def _as_array(model: SequenceModel, x) -> np.ndarray:
    if isinstance(x, (FeatureVector, FeatureMatrix)):
        if x.family != model.family:
            raise InvalidArgument(
                f"{model.kind} model consumes {model.family} features, got {x.family}"
            )
        x = x.values
    x = np.asarray(x, dtype=float)
    want = 2 if model.is_frame else 1
    if x.ndim != want or x.shape[-1] != model.input_dim:
        raise InvalidArgument(
            f"{model.kind} model expects {'(T, %d)' % model.input_dim if model.is_frame else '(%d,)' % model.input_dim}"
            f" input, got shape {x.shape}"
        )
    if model.is_frame and x.shape[0] < 1:
        raise InvalidArgument("a frame sequence needs at least one frame")
    return x


def collate(model: SequenceModel, inputs: Sequence) -> tuple[np.ndarray, np.ndarray | None]:
    """Stack validated inputs into a batch, padding frame sequences at the end."""
    arrays = [_as_array(model, x) for x in inputs]
    if not model.is_frame:
        return np.stack(arrays), None
    T = max(a.shape[0] for a in arrays)
    X = np.zeros((len(arrays), T, model.input_dim))
    mask = np.zeros((len(arrays), T), dtype=bool)
    for j, a in enumerate(arrays):
        X[j, : a.shape[0]] = (a - model.in_mean) / model.in_scale
        mask[j, : a.shape[0]] = True
    return X, mask


def _normalise(model, X, mask):
    if mask is None:
        return (X - model.in_mean) / model.in_scale
    return X  # collate already normalised the real frames and left zeros in the padding


# ------------------------------------------------------------ forward/back


def forward_batch(model: SequenceModel, X: np.ndarray, mask: np.ndarray | None):
    """Embeddings and logits of a collated batch, plus a cache for backward."""
    p = model.params
    Xn = _normalise(model, X, mask)
    if model.is_frame:
        feat, lcache = lstm_forward(Xn, mask, model.lstm)
    else:
        feat, lcache = Xn, None
    a1 = np.tanh(feat @ p["branch_W1"] + p["branch_b1"])
    emb = np.tanh(a1 @ p["branch_W2"] + p["branch_b2"])
    logits = emb @ p["head_w"] + p["head_b"][0]
    return emb, logits, (feat, lcache, a1, emb)


def backward_batch(model: SequenceModel, dlogits: np.ndarray, cache) -> dict[str, np.ndarray]:
    p = model.params
    feat, lcache, a1, emb = cache
    g = {"head_w": emb.T @ dlogits, "head_b": np.array([dlogits.sum()])}
    demb = np.outer(dlogits, p["head_w"]) * (1.0 - emb * emb)
    g["branch_W2"] = a1.T @ demb
    g["branch_b2"] = demb.sum(axis=0)
    da1 = (demb @ p["branch_W2"].T) * (1.0 - a1 * a1)
    g["branch_W1"] = feat.T @ da1
    g["branch_b1"] = da1.sum(axis=0)
    if model.is_frame:
        dfeat = da1 @ p["branch_W1"].T
        lg = lstm_backward(dfeat, lcache, model.lstm)
        g["lstm_Wx"], g["lstm_Wh"], g["lstm_b"] = lg.Wx, lg.Wh, lg.b
    return g


def bce_with_logits(logits: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy and its gradient w.r.t. the logits."""
    loss = float(np.mean(np.logaddexp(0.0, logits) - y * logits))
    return loss, (expit(logits) - y) / logits.size


def loss_and_grads(model: SequenceModel, inputs: Sequence, labels) -> tuple[float, dict[str, np.ndarray]]:
    X, mask = collate(model, inputs)
    _, logits, cache = forward_batch(model, X, mask)
    loss, dlogits = bce_with_logits(logits, np.asarray(labels, dtype=float))
    return loss, backward_batch(model, dlogits, cache)


def _check_finite(stage: str, arr: np.ndarray, model: SequenceModel):
    if not np.all(np.isfinite(arr)):
        bad = [k for k, v in model.params.items() if not np.all(np.isfinite(v))]
        raise NumericFailure(
            f"non-finite {stage} in {model.kind} model"
            + (f"; non-finite parameters: {bad}" if bad else "")
        )


def embed(model: SequenceModel, inputs: Sequence, batch_size: int = 256) -> np.ndarray:
    """Final-branch embeddings of many inputs, shape (N, E)."""
    out = []
    for s in range(0, len(inputs), batch_size):
        X, mask = collate(model, inputs[s:s + batch_size])
        emb, logits, _ = forward_batch(model, X, mask)
        _check_finite("embedding", emb, model)
        out.append(emb)
    if not out:
        return np.zeros((0, model.embedding_dim))
    return np.concatenate(out)


def predict_proba(model: SequenceModel, inputs: Sequence, batch_size: int = 256) -> np.ndarray:
    out = []
    for s in range(0, len(inputs), batch_size):
        X, mask = collate(model, inputs[s:s + batch_size])
        _, logits, _ = forward_batch(model, X, mask)
        _check_finite("logit", logits, model)
        out.append(expit(logits))
    return np.concatenate(out) if out else np.zeros(0)


def forward(model: SequenceModel, x) -> tuple[np.ndarray, Prediction]:
    """Embedding and prediction for one input.

    Raises
    ------
    InvalidArgument
        If the input family or dimension does not fit the model kind.
    NumericFailure
        If a non-finite value appears.
    """
    X, mask = collate(model, [x])
    emb, logits, _ = forward_batch(model, X, mask)
    _check_finite("logit", logits, model)
    return emb[0], Prediction(float(expit(logits[0])))


# ------------------------------------------------------------------ training


def fit_normalisation(model: SequenceModel, inputs: Sequence) -> None:
    """Set per-feature mean/scale from training inputs (all frames pooled)."""
    arrays = [_as_array(model, x) for x in inputs]
    pooled = np.concatenate(arrays) if model.is_frame else np.stack(arrays)
    mean = pooled.mean(axis=0)
    scale = pooled.std(axis=0)
    scale[scale < 1e-12] = 1.0
    model.in_mean, model.in_scale = mean, scale


def _streams(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, 0x5EED]))


def sgd_epochs(params: dict, grad_fn, n: int, labels: np.ndarray, hp: TrainConfig, seed: int,
               on_nan, history: list):
    """Momentum gradient descent over mini-batches, mutating ``params`` in place."""
    rng = _streams(seed)
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    with np.errstate(over="ignore", invalid="ignore"):
        _run_epochs(params, grad_fn, n, labels, hp, rng, velocity, on_nan, history)


def _run_epochs(params, grad_fn, n, labels, hp, rng, velocity, on_nan, history):
    for epoch in range(1, hp.epochs + 1):
        order = rng.permutation(n)
        total, correct = 0.0, 0
        for s in range(0, n, hp.batch_size):
            idx = order[s:s + hp.batch_size]
            loss, grads, logits = grad_fn(idx)
            if not np.isfinite(loss):
                on_nan(epoch)
            total += loss * idx.size
            correct += int(np.sum((logits >= 0) == (labels[idx] == 1)))
            if hp.learning_rate == 0:
                continue
            for k, gk in grads.items():
                v = velocity[k]
                v *= hp.momentum
                v -= hp.learning_rate * gk
                params[k] += v
        history.append({"epoch": epoch, "loss": total / n, "accuracy": correct / n})


def train(model: SequenceModel, inputs: Sequence, labels, hyperparams: TrainConfig = TrainConfig(),
          seed: int = 0, fit_norm: bool = True) -> tuple[SequenceModel, list[dict]]:
    """Train a copy of ``model`` with binary cross-entropy.

    Parameters
    ----------
    inputs : sequence
        Frame matrices (frame kinds) or feature vectors (phase-wise kinds).
    labels : array-like of {0, 1}
        1 marks a spontaneous smile.
    seed : int
        Drives the mini-batch shuffling; identical seeds give bit-identical runs.

    Returns
    -------
    model, history
        The trained copy and one ``{"epoch", "loss", "accuracy"}`` dict per epoch.
    """
    labels = np.asarray(labels, dtype=float)
    if len(inputs) == 0:
        raise InvalidArgument("cannot train on an empty dataset")
    if labels.shape != (len(inputs),) or not np.all((labels == 0) | (labels == 1)):
        raise InvalidArgument("labels must be 0/1, one per input")
    model = model.copy()
    if fit_norm:
        fit_normalisation(model, inputs)
    # collate once per batch lazily; phase-wise data fits in one array
    if not model.is_frame:
        X_all, _ = collate(model, inputs)

    def grad_fn(idx):
        if model.is_frame:
            X, mask = collate(model, [inputs[i] for i in idx])
        else:
            X, mask = X_all[idx], None
        _, logits, cache = forward_batch(model, X, mask)
        loss, dlogits = bce_with_logits(logits, labels[idx])
        return loss, backward_batch(model, dlogits, cache), logits

    def on_nan(epoch):
        raise NumericFailure(f"{model.kind} training diverged (non-finite loss) in epoch {epoch}")

    history: list[dict] = []
    sgd_epochs(model.params, grad_fn, len(inputs), labels, hyperparams, seed, on_nan, history)
    for k, v in model.params.items():
        if not np.all(np.isfinite(v)):
            raise NumericFailure(f"{model.kind} training produced non-finite {k}")
    model.metadata = dict(model.metadata, train_seed=seed, hyperparams=vars(hyperparams).copy(),
                          epochs_trained=hyperparams.epochs)
    return model, history


# ------------------------------------------------------------ gradient check


def gradient_check(model: SequenceModel, sample, label: float = 1.0, n_params: int = 200,
                   step: float = 1e-4, seed: int = 0) -> float:
    """Max relative error between backprop and finite differences.

    The numeric gradient uses the fourth-order five-point stencil, which
    allows a step large enough to keep roundoff well below the tolerance.

    ``n_params`` parameters are sampled at random (all of them if the model is
    smaller).  Entries where both gradients are below 1e-8 are compared by
    absolute error.
    """
    _, grads = loss_and_grads(model, [sample], [label])
    keys = sorted(model.params)
    sizes = [model.params[k].size for k in keys]
    total = sum(sizes)
    rng = np.random.default_rng(seed)
    flat_idx = np.sort(rng.choice(total, size=min(n_params, total), replace=False))
    offsets = np.cumsum([0] + sizes)
    worst = 0.0
    for fi in flat_idx:
        j = int(np.searchsorted(offsets, fi, side="right") - 1)
        k, pos = keys[j], fi - offsets[j]
        arr = model.params[k].reshape(-1)
        orig = arr[pos]
        f = {}
        for m in (-2, -1, 1, 2):
            arr[pos] = orig + m * step
            f[m], _ = loss_and_grads(model, [sample], [label])
        arr[pos] = orig
        numeric = (f[-2] - 8 * f[-1] + 8 * f[1] - f[2]) / (12 * step)
        analytic = grads[k].reshape(-1)[pos]
        denom = max(abs(numeric), abs(analytic))
        err = abs(numeric - analytic) if denom < 1e-8 else abs(numeric - analytic) / denom
        worst = max(worst, err)
    return worst
