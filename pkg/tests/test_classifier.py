import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from genuine_smile.classifier import (
    LSTMParams,
    ModelConfig,
    TrainConfig,
    forward,
    fuse_forward,
    gradient_check,
    init_fusion_head,
    init_model,
    load_model,
    lstm_step,
    model_hash,
    save_model,
    stacked_embeddings,
    train,
    train_fusion_head,
)
from genuine_smile.classifier.fusion import fusion_proba
from genuine_smile.classifier.io import FORMAT_VERSION
from genuine_smile.errors import InvalidArgument, LoadFailure, NumericFailure, VersionMismatch
from genuine_smile.features import FeatureVector

SMALL = ModelConfig(hidden_dim=5, branch_dim=8, embedding_dim=4)


def reference_step(x, h, c, Wx, Wh, b):
    """Gate-by-gate LSTM step written with explicit loops."""
    H = h.size
    sig = lambda v: 1.0 / (1.0 + math.exp(-v))  # noqa: E731
    h_new, c_new = np.zeros(H), np.zeros(H)
    for j in range(H):
        pre = [b[k * H + j] + sum(x[d] * Wx[d, k * H + j] for d in range(x.size))
               + sum(h[q] * Wh[q, k * H + j] for q in range(H)) for k in range(4)]
        i, f, g, o = sig(pre[0]), sig(pre[1]), math.tanh(pre[2]), sig(pre[3])
        c_new[j] = f * c[j] + i * g
        h_new[j] = o * math.tanh(c_new[j])
    return h_new, c_new


def randomised(kind, dim, seed=0, config=SMALL):
    m = init_model(kind, dim, config, seed=seed)
    rng = np.random.default_rng(seed + 100)
    for k, v in m.params.items():
        v[...] = rng.normal(0, 0.5, v.shape)
    return m


# --------------------------------------------------------------- LSTM step


def test_lstm_step_all_zero():
    p = LSTMParams(np.zeros((3, 8)), np.zeros((2, 8)), np.zeros(8))
    h, c = lstm_step(np.array([1.0, -2.0, 3.0]), (np.zeros(2), np.zeros(2)), p)
    assert np.array_equal(h, np.zeros(2)) and np.array_equal(c, np.zeros(2))


def test_lstm_step_matches_reference():
    rng = np.random.default_rng(3)
    D, H = 4, 3
    p = LSTMParams(rng.normal(size=(D, 4 * H)), rng.normal(size=(H, 4 * H)), rng.normal(size=4 * H))
    x, h, c = rng.normal(size=D), rng.normal(size=H), rng.normal(size=H)
    h1, c1 = lstm_step(x, (h, c), p)
    h2, c2 = reference_step(x, h, c, p.Wx, p.Wh, p.b)
    assert np.allclose(h1, h2, rtol=0, atol=1e-12)
    assert np.allclose(c1, c2, rtol=0, atol=1e-12)


def test_lstm_step_forget_saturation():
    H = 3
    b = np.zeros(4 * H)
    b[H:2 * H] = 50.0
    p = LSTMParams(np.zeros((2, 4 * H)), np.zeros((H, 4 * H)), b)
    _, c = lstm_step(np.zeros(2), (np.zeros(H), np.ones(H)), p)
    assert np.allclose(c, 1.0, atol=1e-6)


def test_lstm_step_dim_mismatch():
    p = LSTMParams(np.zeros((3, 8)), np.zeros((2, 8)), np.zeros(8))
    with pytest.raises(InvalidArgument):
        lstm_step(np.zeros(4), (np.zeros(2), np.zeros(2)), p)
    with pytest.raises(InvalidArgument):
        LSTMParams(np.zeros((3, 8)), np.zeros((3, 8)), np.zeros(8))


def test_gate_views():
    rng = np.random.default_rng(0)
    p = LSTMParams.init(4, 3, rng)
    wx, wh, b = p.gate("forget")
    assert wx.shape == (4, 3) and wh.shape == (3, 3)
    assert np.all(b == 1.0)


# ----------------------------------------------------------------- forward


def test_zero_head_gives_half():
    m = init_model("au_wise", 476, seed=1)
    _, pred = forward(m, np.random.default_rng(0).normal(size=476))
    assert pred.probability == 0.5 and pred.decision


def test_phase_model_dimension_and_family_checks():
    m = init_model("au_wise", 476)
    forward(m, FeatureVector(np.zeros(476), tuple(f"f{i}" for i in range(476)), "au_wise"))
    with pytest.raises(InvalidArgument):
        forward(m, np.zeros(4352))
    with pytest.raises(InvalidArgument):
        forward(m, FeatureVector(np.zeros(476), tuple(f"f{i}" for i in range(476)), "cross_au"))
    with pytest.raises(InvalidArgument):
        forward(init_model("auda_frame", 6, SMALL), np.zeros(6))


def test_single_frame_equals_manual_composition():
    m = randomised("auda_frame", 6, seed=2)
    x = np.random.default_rng(5).normal(size=(1, 6))
    emb, pred = forward(m, x)
    p = m.params
    h, _ = lstm_step(x[0], (np.zeros(5), np.zeros(5)), m.lstm)
    a1 = np.tanh(h @ p["branch_W1"] + p["branch_b1"])
    e = np.tanh(a1 @ p["branch_W2"] + p["branch_b2"])
    z = e @ p["head_w"] + p["head_b"][0]
    assert np.allclose(emb, e, rtol=0, atol=1e-12)
    assert pred.probability == pytest.approx(1 / (1 + math.exp(-z)), abs=1e-12)


def test_padding_does_not_change_outputs():
    from genuine_smile.classifier.model import predict_proba

    m = randomised("deep_frame", 6, seed=4)
    rng = np.random.default_rng(9)
    seqs = [rng.normal(size=(n, 6)) for n in (1, 5, 17)]
    batch = predict_proba(m, seqs)
    single = [forward(m, s)[1].probability for s in seqs]
    assert np.allclose(batch, single, rtol=0, atol=1e-14)


@pytest.mark.parametrize("T", [1, 2, 9, 60])
def test_any_sequence_length(T):
    m = randomised("auda_frame", 6)
    emb, pred = forward(m, np.ones((T, 6)))
    assert emb.shape == (4,) and 0 <= pred.probability <= 1


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 100), st.sampled_from(["auda_frame", "cross_au"]))
def test_probability_bounded_under_fuzzing(seed, scale, kind):
    m = init_model(kind, 6, SMALL, seed=seed % 1000)
    rng = np.random.default_rng(seed)
    for v in m.params.values():
        v[...] = rng.normal(0, scale, v.shape)
    x = rng.normal(0, scale, (rng.integers(1, 20), 6) if kind == "auda_frame" else 6)
    p = forward(m, x)[1].probability
    assert math.isfinite(p) and 0.0 <= p <= 1.0


def test_nan_input_raises_numeric_failure():
    m = init_model("au_wise", 3, SMALL)
    with pytest.raises(NumericFailure):
        forward(m, np.array([np.nan, 0.0, 1.0]))


# ---------------------------------------------------------------- training


def separable(n=200, dim=10, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, dim))
    w = rng.normal(size=dim)
    y = (X @ w > 0).astype(float)
    return X, y


def test_training_separable_phase_dataset():
    X, y = separable()
    m = init_model("au_wise", 10, ModelConfig(8, 16, 8), seed=0)
    m2, hist = train(m, list(X), y, TrainConfig(learning_rate=0.05, epochs=200), seed=1)
    assert hist[-1]["accuracy"] >= 0.99
    from genuine_smile.classifier.model import predict_proba
    assert np.mean((predict_proba(m2, list(X)) >= 0.5) == y) >= 0.99
    assert [h["epoch"] for h in hist] == list(range(1, 201))


def test_zero_learning_rate_is_a_fixed_point():
    X, y = separable(50)
    m = init_model("au_wise", 10, SMALL, seed=3)
    m2, _ = train(m, list(X), y, TrainConfig(learning_rate=0.0, epochs=5), seed=1)
    for k in m.params:
        assert np.array_equal(m.params[k], m2.params[k])


@pytest.mark.parametrize("kind", ["au_wise", "auda_frame"])
def test_training_is_deterministic(kind):
    rng = np.random.default_rng(0)
    if kind == "au_wise":
        X, y = separable(64)
        X = list(X)
    else:
        X = [rng.normal(size=(rng.integers(3, 12), 10)) for _ in range(40)]
        y = rng.integers(0, 2, 40).astype(float)
    m = init_model(kind, 10, SMALL, seed=3)
    hp = TrainConfig(learning_rate=0.05, epochs=4, batch_size=8)
    a, ha = train(m, X, y, hp, seed=11)
    b, hb = train(m, X, y, hp, seed=11)
    assert model_hash(a) == model_hash(b)
    assert ha == hb
    c, _ = train(m, X, y, hp, seed=12)
    assert model_hash(c) != model_hash(a)


def test_train_does_not_mutate_input_model():
    X, y = separable(40)
    m = init_model("au_wise", 10, SMALL, seed=3)
    before = model_hash(m)
    train(m, list(X), y, TrainConfig(learning_rate=0.1, epochs=3), seed=0)
    assert model_hash(m) == before


def test_train_errors():
    m = init_model("au_wise", 10, SMALL)
    with pytest.raises(InvalidArgument):
        train(m, [], [], TrainConfig())
    X, y = separable(20)
    with pytest.raises(InvalidArgument):
        train(m, list(X), y * 2, TrainConfig())
    with pytest.raises(NumericFailure, match=r"in epoch \d+"):
        train(m, list(X * 1e150), y, TrainConfig(learning_rate=1e300, epochs=3))


# ---------------------------------------------------------- gradient check


@pytest.mark.parametrize("kind", ["deep_frame", "auda_frame", "au_wise", "cross_au"])
def test_gradient_check_every_kind(kind):
    frame = kind.endswith("frame")
    dim = 6 if frame else 40
    m = randomised(kind, dim, seed=7)
    rng = np.random.default_rng(1)
    x = rng.normal(size=(9, dim)) if frame else rng.normal(size=dim)
    assert m.n_params >= 200
    assert gradient_check(m, x, 1.0, n_params=200) < 1e-4
    assert gradient_check(m, x, 0.0, n_params=200, seed=1) < 1e-4


def test_gradient_check_dead_unit():
    m = randomised("au_wise", 40, seed=2)
    # saturate one branch unit so its incoming weights get ~zero gradient
    m.params["branch_b1"][0] = 40.0
    x = np.random.default_rng(0).normal(size=40)
    assert gradient_check(m, x, 1.0, n_params=m.n_params) < 1e-4


def test_phase_model_has_no_lstm_parameters():
    m = init_model("cross_au", 40, SMALL)
    assert m.lstm is None
    assert not any(k.startswith("lstm") for k in m.params)


# ------------------------------------------------------------------ fusion


def four_models(config=ModelConfig(hidden_dim=4, branch_dim=8, embedding_dim=64)):
    dims = {"deep_frame": 5, "auda_frame": 6, "au_wise": 7, "cross_au": 8}
    return {k: randomised(k, d, seed=i, config=config) for i, (k, d) in enumerate(dims.items())}, dims


def fusion_inputs(dims, rng, n=None):
    def one(k, d):
        return rng.normal(size=(rng.integers(2, 8), d)) if k.endswith("frame") else rng.normal(size=d)

    if n is None:
        return {k: one(k, d) for k, d in dims.items()}
    return {k: [one(k, d) for _ in range(n)] for k, d in dims.items()}


def test_fusion_dims_and_zero_head():
    models, dims = four_models()
    head = init_fusion_head(models)
    assert head.input_dim == 256
    assert head.members == ("deep_frame", "auda_frame", "au_wise", "cross_au")
    assert init_fusion_head(models, ("au_wise", "cross_au", "auda_frame")).input_dim == 192
    x = fusion_inputs(dims, np.random.default_rng(0))
    assert fuse_forward(head, models, x).probability == 0.5


def test_fusion_missing_model():
    models, dims = four_models()
    head = init_fusion_head(models)
    del models["au_wise"]
    with pytest.raises(InvalidArgument):
        fuse_forward(head, models, fusion_inputs(dims, np.random.default_rng(0)))
    with pytest.raises(InvalidArgument):
        init_fusion_head(models)


def test_fusion_head_order_matches_concatenation():
    models, dims = four_models()
    head = init_fusion_head(models)
    rng = np.random.default_rng(2)
    head.params["w"][:] = rng.normal(size=256)
    x = fusion_inputs(dims, rng)
    parts = [forward(models[k], x[k])[0] for k in ("deep_frame", "auda_frame", "au_wise", "cross_au")]
    z = np.concatenate(parts) @ head.params["w"]
    assert fuse_forward(head, models, x).probability == pytest.approx(1 / (1 + math.exp(-z)), abs=1e-12)


def test_fusion_training_freezes_members():
    models, dims = four_models()
    rng = np.random.default_rng(3)
    inputs = fusion_inputs(dims, rng, n=60)
    head = init_fusion_head(models)
    E = stacked_embeddings(head, models, inputs)
    y = (E @ rng.normal(size=256) > 0).astype(float)
    hashes = {k: model_hash(m) for k, m in models.items()}
    trained, hist = train_fusion_head(head, models, inputs, y,
                                      TrainConfig(learning_rate=0.1, epochs=300), seed=0)
    assert {k: model_hash(m) for k, m in models.items()} == hashes
    assert np.mean((fusion_proba(trained, E) >= 0.5) == y) >= 0.99
    unchanged, _ = train_fusion_head(head, models, inputs, y, TrainConfig(epochs=0), seed=0)
    assert model_hash(unchanged) == model_hash(head)


# ------------------------------------------------------------------ files


def test_save_load_round_trip(tmp_path):
    models, dims = four_models()
    rng = np.random.default_rng(4)
    x = fusion_inputs(dims, rng)
    for k, m in models.items():
        m.in_mean = rng.normal(size=m.input_dim)
        path = save_model(m, tmp_path / f"{k}.npz")
        back = load_model(path)
        assert back.kind == k and model_hash(back) == model_hash(m)
        e1, p1 = forward(m, x[k])
        e2, p2 = forward(back, x[k])
        assert np.array_equal(e1, e2) and p1.probability == p2.probability
    head = init_fusion_head(models)
    head.params["w"][:] = rng.normal(size=256)
    back = load_model(save_model(head, tmp_path / "head.npz"))
    assert fuse_forward(back, models, x) == fuse_forward(head, models, x)


def test_load_truncated_and_legacy(tmp_path):
    m = init_model("au_wise", 7, SMALL)
    path = save_model(m, tmp_path / "m.npz")
    data = path.read_bytes()
    (tmp_path / "t.npz").write_bytes(data[: len(data) // 2])
    with pytest.raises(LoadFailure):
        load_model(tmp_path / "t.npz")
    with pytest.raises(LoadFailure):
        load_model(tmp_path / "missing.npz")

    import genuine_smile.classifier.io as mio

    old = mio.FORMAT_VERSION
    try:
        mio.FORMAT_VERSION = FORMAT_VERSION - 1
        save_model(m, tmp_path / "legacy.npz")
    finally:
        mio.FORMAT_VERSION = old
    with pytest.raises(VersionMismatch):
        load_model(tmp_path / "legacy.npz")
