from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from genuine_smile.cache import CachedRecord, read_feature_cache, write_feature_cache
from genuine_smile.errors import InsufficientData, InvalidArgument, LoadFailure
from genuine_smile.features import (
    OPENFACE_AUS,
    SMILE,
    AUSignalSet,
    FeatureConfig,
    analyse,
    au_wise_features,
    catalog_names,
    cross_au_features,
    extract_all,
    feature_catalog,
    frame_wise_features,
)
from genuine_smile.phases import EMPTY, Interval, PhaseSegmentation
from genuine_smile.signal_core import TimeSeries

FPS = 50.0
DEFAULT = FeatureConfig()


def trapezoid(rise, plateau, fall, lead=0, tail=0, height=3.0):
    return np.r_[
        np.zeros(lead),
        np.linspace(0, height, rise, endpoint=False),
        np.full(plateau, height),
        np.linspace(height, 0, fall, endpoint=False),
        np.zeros(tail),
    ]


def make_set(arrays, names=OPENFACE_AUS, n=None, label="unlabeled"):
    n = n or len(next(iter(arrays.values())))
    signals = {}
    for name in tuple(names) + (SMILE,):
        signals[name] = TimeSeries.from_values(arrays.get(name, np.zeros(n)), FPS)
    return AUSignalSet(signals, "seq", label)


def smile_set(seed=0, n=120):
    rng = np.random.default_rng(seed)
    smile = trapezoid(30, 40, 30, lead=10, tail=10)[:n]
    arrays = {SMILE: smile}
    for i, au in enumerate(OPENFACE_AUS):
        arrays[au] = rng.uniform(0, 1) * smile + rng.normal(0, 0.1, n).cumsum() * 0.1
    return make_set(arrays)


# ------------------------------------------------------------------- catalog


def test_default_catalog_counts():
    assert len(catalog_names(DEFAULT, "au_wise")) == 476
    assert len(catalog_names(DEFAULT, "cross_au")) == 4352
    assert len(catalog_names(DEFAULT, "frame_wise")) == 144
    per_phase = {}
    for e in feature_catalog(DEFAULT):
        per_phase.setdefault((e.family, e.phase), 0)
        per_phase[(e.family, e.phase)] += 1
    for ph in ("onset", "apex", "offset", "global"):
        assert per_phase[("au_wise", ph)] == 119
        assert per_phase[("cross_au", ph)] == 1088


def test_catalog_is_unique_and_stable():
    names = [e.name for e in feature_catalog(DEFAULT)]
    assert len(names) == len(set(names))
    assert names == [e.name for e in feature_catalog(FeatureConfig())]


def test_two_au_catalog():
    cfg = FeatureConfig(au_names=("AU06", "AU12"))
    per_phase = [e for e in feature_catalog(cfg, "cross_au") if e.phase == "onset"]
    assert len(per_phase) == 8
    assert {e.subject for e in per_phase} == {"AU06~AU12"}


def test_frame_descriptor_order():
    names = catalog_names(DEFAULT, "frame_wise")[:8]
    assert [n.split("/")[-1] for n in names] == [
        "value", "slope_w9", "coeff_w9", "adjusted_w9",
        "slope_w27", "coeff_w27", "adjusted_w27", "second_order",
    ]


def test_unknown_family_and_descriptor():
    with pytest.raises(InvalidArgument):
        feature_catalog(DEFAULT, "nope")
    with pytest.raises(InvalidArgument):
        FeatureConfig(au_descriptors=("mean_adjusted", "median"))


# ------------------------------------------------------------- frame-wise


def test_frame_wise_dims_match_catalog():
    fm = frame_wise_features(smile_set())
    assert fm.dims == (120, len(catalog_names(DEFAULT, "frame_wise")))
    assert all(r.values.size == 144 for r in fm.rows())


def test_frame_wise_all_zero_signals():
    fm = frame_wise_features(make_set({}, n=60))
    assert np.array_equal(fm.values, np.zeros((60, 144)))


def test_frame_wise_single_ramp_column_support():
    n = 60
    fm = frame_wise_features(make_set({"AU12": np.linspace(0, 2, n)}, n=n))
    nonzero = {fm.catalog[j].split("/")[1] for j in np.flatnonzero(np.any(fm.values != 0, axis=0))}
    assert nonzero == {"AU12"}


def test_frame_wise_too_short():
    with pytest.raises(InsufficientData):
        frame_wise_features(make_set({}, n=20))


# ----------------------------------------------------------------- AU-wise


def test_au_wise_counts_and_empty_phase():
    aus = smile_set()
    an = analyse(aus)
    fv = au_wise_features(an)
    assert fv.values.shape == (476,)
    seg = PhaseSegmentation(EMPTY, an.phases.apex, an.phases.offset, an.phases.global_phase)
    fv2 = au_wise_features(aus, seg)
    onset = np.array([n.startswith("au_wise/onset/") for n in fv2.catalog])
    assert np.all(fv2.values[onset] == 0)
    assert np.any(fv2.values[~onset] != 0)


def test_au_wise_trapezoid_signs():
    smile = trapezoid(40, 40, 40, lead=10, tail=10)
    fv = au_wise_features(make_set({SMILE: smile, "AU12": 0.8 * smile}))
    d = fv.as_dict()
    assert d["au_wise/onset/AU12/mean_adjusted"] > 0
    assert d["au_wise/offset/AU12/mean_adjusted"] < 0
    assert d["au_wise/onset/AU06/mean_adjusted"] == 0
    assert 0 < d["au_wise/apex/AU12/duration_ratio"] < 1
    assert d["au_wise/global/AU12/duration_ratio"] == 1


def test_au_wise_matches_direct_statistics():
    aus = smile_set(3)
    an = analyse(aus)
    d = au_wise_features(an).as_dict()
    s, e = an.phases.apex
    adj = an.dynamics["AU09"][9].adjusted[s:e]
    v = aus["AU09"].values[s:e]
    assert d["au_wise/apex/AU09/mean_adjusted"] == pytest.approx(sum(adj) / len(adj), rel=1e-12)
    assert d["au_wise/apex/AU09/min_adjusted"] == min(adj)
    assert d["au_wise/apex/AU09/amplitude"] == max(v) - min(v)
    assert d["au_wise/apex/AU09/duration_ratio"] == (e - s) / aus.n_frames


# ---------------------------------------------------------------- cross-AU


def test_cross_au_counts():
    assert cross_au_features(smile_set()).values.shape == (4352,)


def test_cross_au_identical_pair():
    smile = trapezoid(30, 30, 30, lead=5, tail=5)
    sig = 0.5 * smile + np.sin(np.arange(smile.size) / 7)
    cfg = FeatureConfig(au_names=("AU06", "AU12"))
    fv = cross_au_features(make_set({SMILE: smile, "AU06": sig, "AU12": sig}, names=cfg.au_names),
                           config=cfg)
    for ph in ("onset", "apex", "offset", "global"):
        d = {k.split("/")[-1]: v for k, v in fv.as_dict().items() if f"/{ph}/" in k}
        assert d["mean_delta_diff"] == d["max_delta_diff"] == d["std_delta_diff"] == 0
        assert d["slope_corr"] == pytest.approx(1.0, abs=1e-12)
        assert d["rise_lag"] == d["fall_lag"] == 0
        assert d["max_adjusted_diff"] == d["min_adjusted_diff"] == 0


def test_cross_au_peak_lag():
    n = 140
    t = np.arange(n)
    bump = lambda c: 2.0 * np.exp(-0.5 * ((t - c) / 8.0) ** 2)  # noqa: E731
    cfg = FeatureConfig(au_names=("AU06", "AU12"))
    smile = trapezoid(30, 40, 30, lead=20, tail=20)
    aus = make_set({SMILE: smile, "AU06": bump(50), "AU12": bump(70)}, names=cfg.au_names)
    d = cross_au_features(aus, config=cfg).as_dict()
    assert d["cross_au/global/AU06~AU12/rise_lag"] == pytest.approx(-0.4, abs=1e-12)
    assert d["cross_au/global/AU06~AU12/fall_lag"] == pytest.approx(-0.4, abs=1e-12)


def test_cross_au_matches_oracle():
    aus = smile_set(5)
    an = analyse(aus)
    d = cross_au_features(an).as_dict()
    s, e = an.phases.onset
    da = list(an.dynamics["AU04"][9].slope[s:e])
    db = list(an.dynamics["AU10"][9].slope[s:e])
    aa = list(an.dynamics["AU04"][9].adjusted[s:e])
    ab = list(an.dynamics["AU10"][9].adjusted[s:e])
    diff = [abs(x - y) for x, y in zip(da, db)]
    mean = sum(diff) / len(diff)
    std = (sum((x - mean) ** 2 for x in diff) / len(diff)) ** 0.5
    key = "cross_au/onset/AU04~AU10/"
    assert d[key + "mean_delta_diff"] == pytest.approx(mean, rel=1e-12)
    assert d[key + "std_delta_diff"] == pytest.approx(std, rel=1e-9)
    assert d[key + "slope_corr"] == pytest.approx(oracles.pearson(da, db), abs=1e-12)
    lag = (oracles.first_argmax(aa) - oracles.first_argmax(ab)) / FPS
    assert d[key + "rise_lag"] == pytest.approx(lag, abs=1e-15)
    assert d[key + "min_adjusted_diff"] == min(aa) - min(ab)


def test_cross_au_swap_symmetry():
    aus = smile_set(7)
    swapped = dict(aus.signals)
    swapped["AU06"], swapped["AU12"] = aus.signals["AU12"], aus.signals["AU06"]
    a = cross_au_features(aus).as_dict()
    b = cross_au_features(AUSignalSet(swapped)).as_dict()
    for ph in ("onset", "apex", "offset", "global"):
        key = f"cross_au/{ph}/AU06~AU12/"
        for desc in ("mean_delta_diff", "max_delta_diff", "std_delta_diff", "slope_corr"):
            assert a[key + desc] == pytest.approx(b[key + desc], rel=1e-12, abs=1e-12)
        for desc in ("rise_lag", "fall_lag", "max_adjusted_diff", "min_adjusted_diff"):
            assert a[key + desc] == pytest.approx(-b[key + desc], rel=1e-12, abs=1e-12)


def test_permutation_consistency():
    aus = smile_set(9)
    rng = np.random.default_rng(0)
    perm = list(rng.permutation(OPENFACE_AUS))
    shuffled = AUSignalSet({k: aus.signals[k] for k in perm + [SMILE]})
    cfg = FeatureConfig(au_names=tuple(perm))
    for fn in (au_wise_features, cross_au_features):
        assert fn(aus).as_dict() == fn(shuffled, config=cfg).as_dict()
    fa, fb = frame_wise_features(aus), frame_wise_features(shuffled, cfg)
    cols_a = dict(zip(fa.catalog, fa.values.T.tolist()))
    cols_b = dict(zip(fb.catalog, fb.values.T.tolist()))
    assert cols_a == cols_b


@settings(max_examples=40, deadline=None)
@given(st.integers(27, 90), st.integers(0, 2**32 - 1), st.sampled_from(["const", "noise", "steps"]))
def test_features_always_finite(n, seed, kind):
    rng = np.random.default_rng(seed)
    arrays = {}
    for name in OPENFACE_AUS + (SMILE,):
        if kind == "const":
            arrays[name] = np.full(n, rng.uniform(0, 5))
        elif kind == "noise":
            arrays[name] = rng.uniform(0, 5, n)
        else:
            arrays[name] = np.repeat(rng.uniform(0, 5, n // 9 + 1), 9)[:n]
    feats = extract_all(make_set(arrays, n=n))
    for f in (feats.frame_wise, feats.au_wise, feats.cross_au):
        assert np.all(np.isfinite(f.values))


def test_constant_signals_have_empty_phases():
    feats = extract_all(make_set({SMILE: np.full(50, 2.0)}, n=50))
    assert feats.phases.onset.empty and feats.phases.offset.empty
    assert feats.phases.global_phase == Interval(0, 50)


def test_shorter_than_window_rejected():
    with pytest.raises(InsufficientData):
        au_wise_features(make_set({}, n=26))


def test_signal_set_validation():
    a = TimeSeries.from_values(np.zeros(10), FPS)
    b = TimeSeries.from_values(np.zeros(11), FPS)
    with pytest.raises(InvalidArgument):
        AUSignalSet({"AU01": a, "AU02": b})
    with pytest.raises(InvalidArgument):
        AUSignalSet({"AU01": a}, label="fake")
    lone = TimeSeries.from_values(np.zeros(30), FPS)
    with pytest.raises(InvalidArgument, match="AU02"):
        frame_wise_features(AUSignalSet({"AU01": lone}))


# -------------------------------------------------------------------- cache


def test_cache_round_trip_is_bit_exact(tmp_path):
    feats = [extract_all(replace(smile_set(s), sequence_id=f"s{s}")) for s in range(3)]
    tricky = np.array([0.1, 1 / 3, -2.5e-308, 1e308, np.nextafter(1.0, 2.0)])
    for fam in ("au_wise", "cross_au", "frame_wise"):
        recs = []
        for i, f in enumerate(feats):
            vals = getattr(f, fam).values.copy()
            vals.flat[: tricky.size] = tricky
            recs.append(CachedRecord(f"s{i}", f"subj{i}", "posed", vals))
        write_feature_cache(tmp_path, fam, getattr(feats[0], fam).catalog, recs)
        names, back = read_feature_cache(tmp_path, fam)
        assert names == getattr(feats[0], fam).catalog
        for r0, r1 in zip(recs, back):
            assert (r1.sequence_id, r1.subject, r1.label) == (r0.sequence_id, r0.subject, r0.label)
            assert r1.values.shape == r0.values.shape
            assert np.array_equal(r1.values.view(np.int64), r0.values.view(np.int64))


def test_cache_rejects_tampered_catalog(tmp_path):
    write_feature_cache(tmp_path, "au_wise", ["a", "b"], [CachedRecord("s", "p", "posed", np.ones(2))])
    side = tmp_path / "au_wise.catalog.json"
    side.write_text(side.read_text().replace('"b"', '"c"'))
    with pytest.raises(LoadFailure):
        read_feature_cache(tmp_path, "au_wise")
    with pytest.raises(LoadFailure):
        read_feature_cache(tmp_path, "cross_au")
