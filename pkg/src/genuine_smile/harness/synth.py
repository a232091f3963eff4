"""Synthetic labelled smile sequences.

Every sequence is a trapezoidal smile-intensity profile (flat lead-in, linear
rise, apex plateau, linear fall, flat tail) with AU tracks derived from it.
Spontaneous smiles rise more slowly, hold the apex longer and co-activate
AU06 with AU12, with AU06 trailing by a few frames; posed smiles rise fast and
carry only a weak AU06.  Remaining AUs get a class-independent Gaussian bump,
so they are distractors.  Deep per-frame vectors are a fixed random mixing
of smile intensity, its frame difference and AU06, plus noise.
"""
from __future__ import annotations

import numpy as np

from ..errors import InvalidArgument
from ..features import AUSignalSet, FeatureConfig
from ..signal_core import TimeSeries
from .config import SynthParams
from .data import Dataset, SequenceRecord


def _trapezoid(n: int, lead: int, rise: int, apex: int, fall: int) -> np.ndarray:
    """Unit-height trapezoid sampled on ``n`` frames."""
    t = np.arange(n, dtype=float)
    up = np.clip((t - lead + 1) / rise, 0.0, 1.0)
    down = np.clip((lead + rise + apex + fall - 1 - t) / fall, 0.0, 1.0)
    return np.minimum(up, down)


def _draw(rng, lo_hi, integer=False):
    lo, hi = lo_hi
    return int(rng.integers(lo, hi + 1)) if integer else float(rng.uniform(lo, hi))


def _sequence(rng, label: str, p: SynthParams, config: FeatureConfig, mix: np.ndarray):
    spont = label == "spontaneous"
    lead, tail, fall = (_draw(rng, getattr(p, k), True) for k in ("lead", "tail", "fall"))
    rise = _draw(rng, p.rise_spontaneous if spont else p.rise_posed, True)
    apex = _draw(rng, p.apex_spontaneous if spont else p.apex_posed, True)
    n = lead + rise + apex + fall + tail
    height = _draw(rng, p.height)
    profile = _trapezoid(n, lead, rise, apex, fall)
    smile = height * profile

    tracks = {}
    for au in config.au_names:
        centre = rng.uniform(0, n)
        width = rng.uniform(5, 30)
        amp = rng.uniform(0, p.distractor_amplitude)
        tracks[au] = amp * np.exp(-0.5 * ((np.arange(n) - centre) / width) ** 2)
    if "AU12" in tracks:
        tracks["AU12"] = _draw(rng, (0.85, 1.0)) * smile
    if "AU06" in tracks:
        if spont:
            gain = _draw(rng, p.au6_gain_spontaneous)
            delay = _draw(rng, p.au6_delay_spontaneous, True)
            shifted = _trapezoid(n, lead + delay, rise, max(apex - delay, 1), fall)
            tracks["AU06"] = gain * height * shifted
        else:
            tracks["AU06"] = _draw(rng, p.au6_gain_posed) * smile
    if "AU25" in tracks:
        tracks["AU25"] = _draw(rng, (0.3, 0.6)) * smile
    tracks[config.smile_name] = smile

    # noise is drawn for every signal, even at zero amplitude, so the
    # random stream (and thus every other draw) does not depend on it
    noise = rng.standard_normal((len(tracks), n))
    t = np.arange(n) / p.fps
    signals = {
        name: TimeSeries(vals + p.noise * noise[j], t, p.fps)
        for j, (name, vals) in enumerate(tracks.items())
    }
    au6 = tracks.get("AU06", np.zeros(n))
    drive = np.column_stack([smile, np.gradient(smile) * 10.0, au6])
    deep = drive @ mix + p.deep_noise * rng.standard_normal((n, mix.shape[1]))
    return signals, deep


def synth_generate(n_per_class: int, seed: int = 0, params: SynthParams = SynthParams(),
                   config: FeatureConfig = FeatureConfig()) -> Dataset:
    """Balanced synthetic dataset, one subject per sequence.

    Sequences alternate spontaneous/posed.  The same ``seed`` and ``params``
    always give a bit-identical dataset.

    Parameters
    ----------
    n_per_class : int
        Sequences per class, at least 1.
    seed : int
    params : SynthParams
        Class-dependent shape ranges, noise levels and deep-feature width.
    """
    if n_per_class < 1:
        raise InvalidArgument("n_per_class must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5A1]))
    mix = np.random.default_rng(np.random.SeedSequence([seed, 0xD33])).standard_normal(
        (3, params.deep_dim)
    ) / np.sqrt(3)
    records = []
    for i in range(2 * n_per_class):
        label = "spontaneous" if i % 2 == 0 else "posed"
        sid, subject = f"seq{i:04d}", f"S{i:04d}"
        signals, deep = _sequence(rng, label, params, config, mix)
        aus = AUSignalSet(signals, sid, label, subject)
        records.append(SequenceRecord(sid, subject, label, aus, deep if params.deep_dim else None))
    return Dataset(records)
