import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from genuine_smile.errors import InsufficientData, InvalidArgument
from genuine_smile.phases import (
    EMPTY,
    Interval,
    PhaseConfig,
    phase_slice,
    segment_phases,
)
from genuine_smile.signal_core import TimeSeries, compute_dynamics

FPS = 50.0
TOL = math.ceil(9 / 2)


def trapezoid(rise, plateau, fall, lead=0, tail=0, height=3.0):
    return np.r_[
        np.zeros(lead),
        np.linspace(0, height, rise, endpoint=False),
        np.full(plateau, height),
        np.linspace(height, 0, fall, endpoint=False),
        np.zeros(tail),
    ]


def segment(v, config=PhaseConfig()):
    s = TimeSeries.from_values(v, FPS)
    return segment_phases(compute_dynamics(s), s, config)


def near(iv, start, end, tol=TOL):
    return abs(iv.start - start) <= tol and abs(iv.end - end) <= tol


def test_trapezoid_boundaries():
    seg = segment(trapezoid(50, 50, 50))
    assert near(seg.onset, 0, 50)
    assert near(seg.apex, 50, 100)
    assert near(seg.offset, 100, 150)
    assert seg.global_phase == Interval(0, 150)


def test_trapezoid_with_neutral_margins():
    seg = segment(trapezoid(30, 40, 25, lead=15, tail=20))
    assert near(seg.onset, 15, 45)
    assert near(seg.apex, 45, 85)
    assert near(seg.offset, 85, 110)


def test_constant_intensity_has_only_global_phase():
    seg = segment(np.full(60, 1.7))
    assert seg.onset.empty and seg.apex.empty and seg.offset.empty
    assert seg.global_phase == Interval(0, 60)


def test_rise_then_hold_has_no_offset():
    v = np.r_[np.linspace(0, 3, 40, endpoint=False), np.full(40, 3.0)]
    seg = segment(v)
    assert near(seg.onset, 0, 40)
    assert seg.offset.empty
    assert near(seg.apex, 40, 80)
    assert seg.apex.end == 80


def test_pure_ramp_is_all_onset():
    seg = segment(np.linspace(0, 3, 60))
    assert seg.onset == Interval(0, 60)
    assert seg.offset.empty


@pytest.mark.parametrize("shape", [(50, 50, 50), (30, 20, 30), (20, 60, 45), (45, 30, 15)])
def test_time_reversal_swaps_onset_and_offset(shape):
    v = trapezoid(*shape, lead=5, tail=7)
    n = v.size
    fwd = segment(v)
    rev = segment(v[::-1].copy())

    def mirror(iv):
        return Interval(n - iv.end, n - iv.start)

    assert near(rev.onset, *mirror(fwd.offset))
    assert near(rev.offset, *mirror(fwd.onset))


def test_short_sequence_rejected():
    s = TimeSeries.from_values(np.arange(6.0), FPS)
    with pytest.raises(InsufficientData):
        segment_phases(compute_dynamics(s), s)


def test_segmentation_is_deterministic():
    v = trapezoid(30, 30, 30) + np.random.default_rng(4).normal(0, 0.05, 90)
    assert segment(v) == segment(v.copy())


def test_config_must_be_positive():
    with pytest.raises(InvalidArgument):
        PhaseConfig(tau_rel=0)


@settings(max_examples=60, deadline=None)
@given(
    st.integers(12, 60), st.integers(0, 60), st.integers(12, 60),
    st.integers(0, 20), st.integers(0, 20), st.floats(0, 0.3),
    st.integers(0, 2**32 - 1),
)
def test_intervals_ordered_and_in_bounds(rise, plateau, fall, lead, tail, noise, seed):
    v = trapezoid(rise, plateau, fall, lead, tail)
    v = v + np.random.default_rng(seed).normal(0, noise, v.size)
    seg = segment(v)
    n = v.size
    for iv in (seg.onset, seg.apex, seg.offset):
        assert iv.empty or 0 <= iv.start < iv.end <= n
    if not seg.onset.empty and not seg.offset.empty:
        assert seg.onset.end <= seg.offset.start
    if not seg.apex.empty:
        if not seg.onset.empty:
            assert seg.apex.start >= seg.onset.end
        if not seg.offset.empty:
            assert seg.apex.end <= seg.offset.start


def test_phase_slice():
    track = np.arange(150.0)
    assert phase_slice(track, Interval(50, 100)).size == 50
    assert phase_slice(track, EMPTY).size == 0
    assert np.array_equal(phase_slice(track, Interval(0, 150)), track)
    with pytest.raises(InvalidArgument):
        phase_slice(track, Interval(100, 160))
    with pytest.raises(InvalidArgument):
        phase_slice(track, Interval(-1, 5))
