"""Event generation from frame pairs under a known camera model.

Per pixel the log-intensity change over the interval is quantized by the
threshold: n = floor(|delta| / theta) events of polarity sign(delta).
The leftover below one threshold is never emitted, so the integral of
the generated stream always satisfies |delta - theta * integral| < theta.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .frame_event import CameraModel, log_intensity_ratio
from .stream import EventStream, Frame, StreamError

TIMING_MODES = ("uniform", "leading_edge")

# tolerance on |delta|/theta so exact multiples survive log/exp rounding
_FLOOR_EPS = 1e-9


@dataclass(frozen=True)
class TimingModel:
    """Intra-interval timestamp placement (the counts fix everything else).

    uniform: events evenly spaced with a constant per-pixel step ending
    inside (t0, t1]; leading_edge: packed at t0+1, t0+2, ...
    """

    mode: str = "uniform"

    def __post_init__(self):
        if self.mode not in TIMING_MODES:
            raise StreamError(f"unknown timing mode {self.mode!r}")


def simulate_pair(f0: Frame, f1: Frame, model: CameraModel, t0: int, t1: int,
                  timing: TimingModel = TimingModel()) -> EventStream:
    """Generate the event stream for one frame interval."""
    if t0 >= t1:
        raise StreamError(f"need t0 < t1, got [{t0}, {t1}]")
    theta = model.theta.values
    if np.any(theta <= 0):
        raise StreamError("simulation requires strictly positive thresholds")
    delta = log_intensity_ratio(f0, f1, model.k).values

    counts = np.floor(np.abs(delta) / theta + _FLOOR_EPS).astype(np.int64).ravel()
    sign = np.where(delta >= 0, 1, -1).astype(np.int8).ravel()
    total = int(counts.sum())
    if total == 0:
        return EventStream.empty(f0.width, f0.height, t0, t1)

    active = counts > 0
    pix = np.flatnonzero(active)
    n_per = counts[pix]
    pix_rep = np.repeat(pix, n_per)
    # j = 0..n-1 within each pixel's burst
    offsets = np.repeat(np.cumsum(n_per) - n_per, n_per)
    j = np.arange(total, dtype=np.int64) - offsets

    # timestamps stay strictly inside (t0, t1) so half-open slicing along
    # frame boundaries re-partitions a simulated sequence exactly
    if timing.mode == "uniform":
        step = np.maximum((t1 - t0) // (np.repeat(n_per, n_per) + 1), 1)
        ts = t0 + (j + 1) * step
    else:
        ts = t0 + 1 + j
    ts = np.minimum(ts, max(t1 - 1, t0 + 1))

    x = (pix_rep % f0.width).astype(np.int32)
    y = (pix_rep // f0.width).astype(np.int32)
    p = sign[pix_rep]
    return EventStream.from_arrays(f0.width, f0.height, ts, x, y, p,
                                   t0, t1, sort=True)


def simulate_sequence(frames: Sequence[Frame], model: CameraModel,
                      timing: TimingModel = TimingModel()) -> EventStream:
    """Concatenate per-interval simulations over a timestamped frame sequence."""
    if len(frames) < 2:
        raise StreamError("need at least two frames")
    ts = [f.t for f in frames]
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise StreamError("frame timestamps must be strictly increasing")
    parts = [simulate_pair(f0, f1, model, f0.t, f1.t, timing)
             for f0, f1 in zip(frames, frames[1:])]
    return EventStream.from_arrays(
        frames[0].width, frames[0].height,
        np.concatenate([s.t for s in parts]),
        np.concatenate([s.x for s in parts]),
        np.concatenate([s.y for s in parts]),
        np.concatenate([s.p for s in parts]),
        ts[0], ts[-1], sort=True)
