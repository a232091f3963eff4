"""Sliding-window regression dynamics of uniformly sampled scalar signals.

Every frame ``i`` gets a least-squares trend line fitted over a window of
``window`` frames centred on it.  From the fit we keep

* the slope ``delta`` (signal units per second),
* the correlation ``r`` between signal and time, in ``[-1, 1]``,
* the r-adjusted slope ``delta * |r|``.

Near the sequence edges the window shrinks symmetrically to the frames that
are available; the first and last frame reuse the 3-frame window at the
boundary, so output length always equals input length.

Each window is evaluated with the two-pass (centred) formula on a strided
view of the signal, which costs ``O(T * window)`` but carries no running-sum
drift.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InsufficientData, InvalidArgument

__all__ = [
    "TimeSeries",
    "DynamicsTrack",
    "DynamicsBundle",
    "ExtremaTiming",
    "sliding_slope",
    "sliding_regression_coeff",
    "sliding_regression",
    "r_adjusted",
    "second_order_dynamics",
    "pairwise_delta_diff",
    "extrema_timing",
    "compute_dynamics",
    "window_layout",
]

_UNIFORM_RTOL = 1e-9
# windows whose centred sum of squares is below this fraction of sum(v**2)
# are rounding noise around a constant and get r = 0
_FLAT_RTOL = (64 * np.finfo(float).eps) ** 2

DEFAULT_WINDOWS = (9, 27)


@dataclass(frozen=True)
class TimeSeries:
    """One uniformly sampled scalar signal.

    Validation happens at construction; an instance is always well formed.
    """

    values: np.ndarray
    timestamps: np.ndarray
    fps: float

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=float)
        t = np.ascontiguousarray(self.timestamps, dtype=float)
        if v.ndim != 1 or t.ndim != 1 or v.shape != t.shape:
            raise InvalidArgument(
                f"values and timestamps must be 1-D of equal length, got {v.shape} and {t.shape}"
            )
        if v.size == 0:
            raise InsufficientData("a time series needs at least one sample")
        if not (np.isfinite(self.fps) and self.fps > 0):
            raise InvalidArgument(f"fps must be positive and finite, got {self.fps}")
        if not np.all(np.isfinite(v)):
            bad = int(np.flatnonzero(~np.isfinite(v))[0])
            raise InvalidArgument(f"non-finite sample at index {bad}")
        if not np.all(np.isfinite(t)):
            raise InvalidArgument("non-finite timestamp")
        if v.size > 1:
            steps = np.diff(t)
            dt = 1.0 / self.fps
            # relative to the frame period, plus the rounding floor of |t|
            slack = _UNIFORM_RTOL * dt + 4 * np.finfo(float).eps * np.abs(t[1:])
            bad = np.flatnonzero(np.abs(steps - dt) > slack)
            if bad.size:
                raise InvalidArgument(
                    f"timestamps are not uniform at {self.fps} fps (first offending step at index {bad[0] + 1})"
                )
        v.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "fps", float(self.fps))

    @classmethod
    def from_values(cls, values, fps: float, t0: float = 0.0) -> "TimeSeries":
        """Build a series with timestamps ``t0 + i / fps``."""
        values = np.asarray(values, dtype=float)
        return cls(values, t0 + np.arange(values.size) / fps, fps)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class DynamicsTrack:
    slope: np.ndarray
    coeff: np.ndarray
    adjusted: np.ndarray
    window: int


@dataclass(frozen=True)
class DynamicsBundle:
    """Dynamics tracks of one signal for every configured window size.

    ``second_order`` holds the regression dynamics of the slope track of
    ``second_order_source`` (the smallest window unless configured otherwise).
    """

    tracks: dict[int, DynamicsTrack]
    second_order: DynamicsTrack
    second_order_source: int

    @property
    def windows(self) -> tuple[int, ...]:
        return tuple(sorted(self.tracks))

    def __getitem__(self, window: int) -> DynamicsTrack:
        return self.tracks[window]

    @property
    def finest(self) -> DynamicsTrack:
        return self.tracks[min(self.tracks)]


@dataclass(frozen=True)
class ExtremaTiming:
    t_max_a: float
    t_min_a: float
    t_max_b: float
    t_min_b: float
    rise_lag: float = field(init=False)
    fall_lag: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "rise_lag", self.t_max_a - self.t_max_b)
        object.__setattr__(self, "fall_lag", self.t_min_a - self.t_min_b)


def _check_window(window) -> int:
    if isinstance(window, (bool, np.bool_)) or int(window) != window:
        raise InvalidArgument(f"window must be an integer, got {window!r}")
    window = int(window)
    if window < 3 or window % 2 == 0:
        raise InvalidArgument(f"window must be odd and >= 3, got {window}")
    return window


def window_layout(n: int, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Start index and width of the regression window used for each frame.

    Parameters
    ----------
    n : int
        Sequence length, at least 3.
    window : int
        Nominal (odd) window width.

    Returns
    -------
    starts, widths : ndarray of int
    """
    window = _check_window(window)
    if n < 3:
        raise InsufficientData(f"need at least 3 frames, got {n}")
    idx = np.arange(n)
    half = np.minimum(np.minimum(idx, n - 1 - idx), window // 2)
    half = np.maximum(half, 1)
    # the two end frames borrow the 3-frame window next to them
    starts = np.clip(idx - half, 0, n - 3)
    return starts, 2 * half + 1


def _regress(values: np.ndarray, fps: float, window: int) -> tuple[np.ndarray, np.ndarray]:
    n = values.size
    starts, widths = window_layout(n, window)
    slope = np.empty(n)
    coeff = np.empty(n)
    dt = 1.0 / fps
    for w in np.unique(widths):
        sel = np.flatnonzero(widths == w)
        win = sliding_window_view(values, int(w))[starts[sel]]
        # offsets from the window's mean time; exact for uniform sampling
        k = (np.arange(w) - (w - 1) / 2.0) * dt
        dv = win - win.mean(axis=1, keepdims=True)
        sxy = dv @ k
        sxx = k @ k
        syy = np.einsum("ij,ij->i", dv, dv)
        slope[sel] = sxy / sxx
        flat = syy <= _FLAT_RTOL * np.einsum("ij,ij->i", win, win)
        with np.errstate(invalid="ignore", divide="ignore"):
            r = sxy / np.sqrt(sxx * syy)
        r[flat] = 0.0
        coeff[sel] = np.clip(r, -1.0, 1.0)
    return slope, coeff


def _as_series(series) -> TimeSeries:
    if not isinstance(series, TimeSeries):
        raise InvalidArgument(f"expected a TimeSeries, got {type(series).__name__}")
    if len(series) < 3:
        raise InsufficientData(f"need at least 3 frames, got {len(series)}")
    return series


def sliding_regression(series: TimeSeries, window: int) -> DynamicsTrack:
    """Slope, correlation and r-adjusted slope for every frame."""
    window = _check_window(window)
    series = _as_series(series)
    slope, coeff = _regress(series.values, series.fps, window)
    return DynamicsTrack(slope, coeff, slope * np.abs(coeff), window)


def sliding_slope(series: TimeSeries, window: int) -> np.ndarray:
    """Least-squares trend slope in a centred window, per frame.

    Raises
    ------
    InvalidArgument
        If ``window`` is even or smaller than 3.
    InsufficientData
        If the series has fewer than 3 frames.
    """
    return sliding_regression(series, window).slope


def sliding_regression_coeff(series: TimeSeries, window: int) -> np.ndarray:
    """Signal/time correlation in a centred window, per frame.

    A window in which the signal is constant yields 0.
    """
    return sliding_regression(series, window).coeff


def r_adjusted(slope, coeff) -> np.ndarray:
    slope = np.asarray(slope, dtype=float)
    coeff = np.asarray(coeff, dtype=float)
    if slope.shape != coeff.shape:
        raise InvalidArgument(f"length mismatch: {slope.shape} vs {coeff.shape}")
    return slope * np.abs(coeff)


def second_order_dynamics(slope_track, fps: float, window: int) -> np.ndarray:
    """Trend slope of a slope track, in signal units per second squared."""
    return sliding_slope(TimeSeries.from_values(slope_track, fps), window)


def pairwise_delta_diff(slope_a, slope_b) -> np.ndarray:
    a = np.asarray(slope_a, dtype=float)
    b = np.asarray(slope_b, dtype=float)
    if a.shape != b.shape:
        raise InvalidArgument(f"length mismatch: {a.shape} vs {b.shape}")
    return np.abs(a - b)


def extrema_timing(adjusted_a, adjusted_b, fps: float) -> ExtremaTiming:
    """Times of the steepest rise and fall of two r-adjusted tracks.

    Times are ``frame / fps`` relative to the start of the given range;
    ties resolve to the earliest frame.
    """
    a = np.asarray(adjusted_a, dtype=float)
    b = np.asarray(adjusted_b, dtype=float)
    if a.shape != b.shape:
        raise InvalidArgument(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise InsufficientData("extrema timing needs at least one frame")
    return ExtremaTiming(
        np.argmax(a) / fps, np.argmin(a) / fps, np.argmax(b) / fps, np.argmin(b) / fps
    )


def compute_dynamics(
    series: TimeSeries,
    windows: Iterable[int] = DEFAULT_WINDOWS,
    second_order_window: int | None = None,
) -> DynamicsBundle:
    """All first- and second-order dynamics of one signal.

    The second-order track is the regression dynamics of the slope track of
    the smallest window, computed with window ``second_order_window``
    (defaults to that same smallest window).
    """
    windows = sorted({_check_window(w) for w in windows})
    if not windows:
        raise InvalidArgument("at least one window size is required")
    tracks = {w: sliding_regression(series, w) for w in windows}
    source = windows[0]
    so_window = source if second_order_window is None else _check_window(second_order_window)
    slope_series = TimeSeries(tracks[source].slope, series.timestamps, series.fps)
    return DynamicsBundle(tracks, sliding_regression(slope_series, so_window), source)

