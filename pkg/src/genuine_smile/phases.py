"""Onset / apex / offset segmentation of a smile-intensity signal.

The rule works on the r-adjusted slope of the smile intensity (smallest
window).  With ``tau = tau_rel * (max - min)`` of that track:

* onset is the longest run of frames whose r-adjusted slope exceeds ``+tau``;
* offset is the longest run below ``-tau`` that starts at or after the end of
  the onset;
* apex is the longest run of frames between onset and offset whose intensity
  reaches ``apex_ratio`` of the sequence maximum.

The global phase always spans the whole sequence.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InsufficientData, InvalidArgument
from .signal_core import DynamicsBundle, TimeSeries

PHASE_NAMES = ("onset", "apex", "offset", "global")


class Interval(NamedTuple):
    """Half-open frame interval ``[start, end)``."""

    start: int
    end: int

    @property
    def empty(self) -> bool:
        return self.end <= self.start

    def __len__(self):
        return max(0, self.end - self.start)


EMPTY = Interval(0, 0)


@dataclass(frozen=True)
class PhaseConfig:
    tau_rel: float = 0.1
    apex_ratio: float = 0.8

    def __post_init__(self):
        if not (self.tau_rel > 0 and self.apex_ratio > 0):
            raise InvalidArgument("phase thresholds must be positive")


@dataclass(frozen=True)
class PhaseSegmentation:
    onset: Interval
    apex: Interval
    offset: Interval
    global_phase: Interval

    def __post_init__(self):
        n = self.global_phase.end
        if self.global_phase != Interval(0, n):
            raise InvalidArgument(f"global phase must be [0, {n}), got {self.global_phase}")
        for name in ("onset", "apex", "offset"):
            iv = getattr(self, name)
            if not iv.empty and not (0 <= iv.start < iv.end <= n):
                raise InvalidArgument(f"{name} interval {iv} outside [0, {n})")

    @property
    def n_frames(self) -> int:
        return self.global_phase.end

    def phases(self) -> dict[str, Interval]:
        return {
            "onset": self.onset,
            "apex": self.apex,
            "offset": self.offset,
            "global": self.global_phase,
        }


def _runs(mask: np.ndarray) -> list[Interval]:
    """Maximal runs of True values."""
    padded = np.r_[False, mask, False].astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return [Interval(int(a), int(b)) for a, b in zip(edges[::2], edges[1::2])]


def _longest(runs: list[Interval]) -> Interval:
    # max() keeps the first of equally long runs
    return max(runs, key=len, default=EMPTY)


def segment_phases(
    smile_dynamics: DynamicsBundle,
    smile_intensity: TimeSeries,
    config: PhaseConfig = PhaseConfig(),
) -> PhaseSegmentation:
    """Detect onset, apex and offset of a smile.

    Parameters
    ----------
    smile_dynamics : DynamicsBundle
        Dynamics of ``smile_intensity``; the smallest window is used.
    smile_intensity : TimeSeries
    config : PhaseConfig

    Returns
    -------
    PhaseSegmentation
        Named phases may be empty; a flat intensity yields only the global
        phase.
    """
    track = smile_dynamics.finest
    v = smile_intensity.values
    n = v.size
    if n < track.window:
        raise InsufficientData(f"sequence of {n} frames is shorter than the window {track.window}")
    if track.adjusted.size != n:
        raise InvalidArgument("dynamics bundle does not match the intensity series")
    whole = Interval(0, n)
    adj = track.adjusted
    if np.ptp(v) == 0:
        return PhaseSegmentation(EMPTY, EMPTY, EMPTY, whole)

    tau = config.tau_rel * np.ptp(adj)
    if tau == 0:
        # a constant non-zero slope (pure ramp) has no spread to scale by
        tau = config.tau_rel * np.max(np.abs(adj))
    if tau == 0:
        return PhaseSegmentation(EMPTY, EMPTY, EMPTY, whole)

    onset = _longest(_runs(adj > tau))
    floor = onset.end if not onset.empty else 0
    offset = _longest([r for r in _runs(adj < -tau) if r.start >= floor])

    lo = floor
    hi = offset.start if not offset.empty else n
    high = np.zeros(n, dtype=bool)
    high[lo:hi] = v[lo:hi] >= config.apex_ratio * v.max()
    apex = _longest(_runs(high))
    return PhaseSegmentation(onset, apex, offset, whole)


def phase_slice(track, phase: Interval) -> np.ndarray:
    """Contiguous sub-track covered by ``phase``."""
    track = np.asarray(track)
    start, end = phase
    if phase.empty:
        if not (0 <= start <= track.shape[0]):
            raise InvalidArgument(f"interval {tuple(phase)} outside a track of {track.shape[0]} frames")
        return track[0:0]
    if start < 0 or end > track.shape[0]:
        raise InvalidArgument(f"interval {tuple(phase)} outside a track of {track.shape[0]} frames")
    return track[start:end]
