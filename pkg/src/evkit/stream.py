"""Core event-stream types and transforms.

Events are kept as parallel numpy arrays (timestamps in integer
microseconds, pixel coordinates, signed polarity).  All types are value
data: arrays are made read-only after construction and every operation
returns a new object.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np


class StreamError(ValueError):
    """Invalid event data (bad coordinates, polarity, ordering...)."""


class Event(NamedTuple):
    t: int
    x: int
    y: int
    p: int


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EventStream:
    """A time-sorted batch of events on a width x height pixel grid.

    The window [t_start, t_end] bounds every timestamp; it may be wider
    than the span of the events themselves (e.g. after slicing).
    """

    width: int
    height: int
    t: np.ndarray  # int64 microseconds, non-decreasing
    x: np.ndarray  # int32
    y: np.ndarray  # int32
    p: np.ndarray  # int8, -1 or +1
    t_start: int
    t_end: int

    def __post_init__(self):
        object.__setattr__(self, "t", _frozen(np.asarray(self.t, np.int64)))
        object.__setattr__(self, "x", _frozen(np.asarray(self.x, np.int32)))
        object.__setattr__(self, "y", _frozen(np.asarray(self.y, np.int32)))
        object.__setattr__(self, "p", _frozen(np.asarray(self.p, np.int8)))
        if self.width <= 0 or self.height <= 0:
            raise StreamError("width and height must be positive")
        n = len(self.t)
        if not (len(self.x) == len(self.y) == len(self.p) == n):
            raise StreamError("field arrays must have equal length")
        if self.t_start < 0 or self.t_end < self.t_start:
            raise StreamError("window must satisfy 0 <= t_start <= t_end")
        if n:
            if self.t[0] < self.t_start or self.t[-1] > self.t_end:
                raise StreamError("event timestamps outside window")
            if np.any(np.diff(self.t) < 0):
                raise StreamError("events not sorted by timestamp")
            if np.any((self.x < 0) | (self.x >= self.width)):
                raise StreamError("x coordinate out of bounds")
            if np.any((self.y < 0) | (self.y >= self.height)):
                raise StreamError("y coordinate out of bounds")
            if np.any((self.p != 1) & (self.p != -1)):
                raise StreamError("polarity must be -1 or +1")

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self) -> Iterator[Event]:
        for i in range(len(self.t)):
            yield Event(int(self.t[i]), int(self.x[i]), int(self.y[i]), int(self.p[i]))

    def __getitem__(self, i: int) -> Event:
        return Event(int(self.t[i]), int(self.x[i]), int(self.y[i]), int(self.p[i]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.t_start == other.t_start
            and self.t_end == other.t_end
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.p, other.p)
        )

    @property
    def pixel_index(self) -> np.ndarray:
        """Flat row-major pixel index per event (int64)."""
        return self.y.astype(np.int64) * self.width + self.x.astype(np.int64)

    @classmethod
    def from_arrays(cls, width, height, t, x, y, p, t_start=None, t_end=None,
                    sort=True) -> "EventStream":
        """Build a stream, sorting by timestamp (stable) when needed."""
        t = np.asarray(t, np.int64)
        x = np.asarray(x, np.int32)
        y = np.asarray(y, np.int32)
        p = np.asarray(p, np.int8)
        if sort and len(t) and np.any(np.diff(t) < 0):
            order = np.argsort(t, kind="stable")
            t, x, y, p = t[order], x[order], y[order], p[order]
        if t_start is None:
            t_start = int(t[0]) if len(t) else 0
        if t_end is None:
            t_end = int(t[-1]) if len(t) else 0
        return cls(width, height, t, x, y, p, int(t_start), int(t_end))

    @classmethod
    def empty(cls, width, height, t_start=0, t_end=0) -> "EventStream":
        z = np.zeros(0)
        return cls(width, height, z, z, z, z, t_start, t_end)


@dataclass(frozen=True)
class Frame:
    """Normalized grayscale image, values in [0, 1], timestamped in us."""

    values: np.ndarray  # float64, shape (height, width)
    t: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, np.float64)
        if v.ndim != 2:
            raise StreamError("frame values must be a 2-D array")
        if np.any(v < 0.0) or np.any(v > 1.0) or not np.all(np.isfinite(v)):
            raise StreamError("frame values must lie in [0, 1]")
        object.__setattr__(self, "values", _frozen(v))
        if self.t < 0:
            raise StreamError("frame timestamp must be non-negative")

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class NoiseConfig:
    """Parameters for the four event-stream noise processes.

    ba_rate: background-activity events per pixel per second.
    hole_prob: probability of dropping each true event.
    jitter_std: gaussian timestamp jitter, microseconds.
    count_dispersion: per-pixel probability of duplicating/removing one event.
    """

    ba_rate: float = 0.0
    hole_prob: float = 0.0
    jitter_std: float = 0.0
    count_dispersion: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.ba_rate < 0 or self.jitter_std < 0 or self.count_dispersion < 0:
            raise StreamError("noise rates must be non-negative")
        if not 0.0 <= self.hole_prob <= 1.0:
            raise StreamError("hole_prob must lie in [0, 1]")

    @property
    def is_identity(self) -> bool:
        return (self.ba_rate == 0 and self.hole_prob == 0
                and self.jitter_std == 0 and self.count_dispersion == 0)


def slice_by_time(stream: EventStream, t0: int, t1: int) -> EventStream:
    """Events with t0 <= t < t1 (half-open); window becomes [t0, t1]."""
    if t0 > t1:
        raise StreamError(f"empty-interval bounds reversed: {t0} > {t1}")
    lo = int(np.searchsorted(stream.t, t0, side="left"))
    hi = int(np.searchsorted(stream.t, t1, side="left"))
    return EventStream(stream.width, stream.height,
                       stream.t[lo:hi], stream.x[lo:hi],
                       stream.y[lo:hi], stream.p[lo:hi], t0, max(t1, t0))


def reverse_stream(stream: EventStream) -> EventStream:
    """Time-reverse within the window: t -> t0+t1-t, polarity negated."""
    t = (stream.t_start + stream.t_end) - stream.t
    # reversing a sorted array gives the new time order directly
    return EventStream(stream.width, stream.height,
                       t[::-1], stream.x[::-1], stream.y[::-1],
                       -stream.p[::-1], stream.t_start, stream.t_end)


def rotate90(stream: EventStream, quarter_turns: int) -> EventStream:
    """Rotate coordinates by 90-degree steps; one turn maps (x,y) -> (h-1-y, x)."""
    if quarter_turns not in (0, 1, 2, 3):
        raise StreamError(f"quarter_turns must be 0..3, got {quarter_turns}")
    x, y = stream.x, stream.y
    w, h = stream.width, stream.height
    for _ in range(quarter_turns):
        x, y = h - 1 - y, x
        w, h = h, w
    return EventStream(w, h, stream.t, x, y, stream.p,
                       stream.t_start, stream.t_end)


def inject_noise(stream: EventStream, cfg: NoiseConfig) -> EventStream:
    """Apply hole/dispersion/jitter/background noise; deterministic per seed."""
    if cfg.is_identity:
        return stream
    rng = np.random.default_rng(cfg.seed)
    t = stream.t.astype(np.int64)
    x = stream.x.copy()
    y = stream.y.copy()
    p = stream.p.copy()

    if cfg.hole_prob > 0 and len(t):
        keep = rng.random(len(t)) >= cfg.hole_prob
        t, x, y, p = t[keep], x[keep], y[keep], p[keep]

    if cfg.count_dispersion > 0 and len(t):
        pix = y.astype(np.int64) * stream.width + x.astype(np.int64)
        extra, removed = [], set()
        for q in np.unique(pix):
            if rng.random() >= min(1.0, cfg.count_dispersion):
                continue
            members = np.flatnonzero(pix == q)
            i = int(rng.choice(members))
            if rng.random() < 0.5:
                tick = -1 if rng.random() < 0.5 else 1
                tt = min(max(int(t[i]) + tick, stream.t_start), stream.t_end)
                extra.append((tt, x[i], y[i], p[i]))
            else:
                removed.add(i)
        if removed:
            keep = np.array([i not in removed for i in range(len(t))])
            t, x, y, p = t[keep], x[keep], y[keep], p[keep]
        if extra:
            et, ex, ey, ep = (np.array(c) for c in zip(*extra))
            t = np.concatenate([t, et.astype(np.int64)])
            x = np.concatenate([x, ex.astype(np.int32)])
            y = np.concatenate([y, ey.astype(np.int32)])
            p = np.concatenate([p, ep.astype(np.int8)])

    if cfg.jitter_std > 0 and len(t):
        jit = np.rint(rng.normal(0.0, cfg.jitter_std, len(t))).astype(np.int64)
        t = np.clip(t + jit, stream.t_start, stream.t_end)

    if cfg.ba_rate > 0:
        duration_s = (stream.t_end - stream.t_start) / 1e6
        mean = cfg.ba_rate * duration_s
        counts = rng.poisson(mean, stream.width * stream.height)
        total = int(counts.sum())
        if total:
            pix = np.repeat(np.arange(stream.width * stream.height), counts)
            bx = (pix % stream.width).astype(np.int32)
            by = (pix // stream.width).astype(np.int32)
            bt = rng.integers(stream.t_start, stream.t_end + 1, total, dtype=np.int64)
            bp = rng.choice(np.array([-1, 1], np.int8), total)
            t = np.concatenate([t, bt])
            x = np.concatenate([x, bx])
            y = np.concatenate([y, by])
            p = np.concatenate([p, bp])

    return EventStream.from_arrays(stream.width, stream.height, t, x, y, p,
                                   stream.t_start, stream.t_end, sort=True)
