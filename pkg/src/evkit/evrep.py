"""Per-pixel statistical channels of an event stream.

Three channels are computed over the stream window: the signed polarity
integral, the event count, and the spread of inter-event intervals at
each pixel.  Two interval-spread conventions are supported:

* ``literal``      -- the interval mean is taken over the event count n
                      (one more than the number of intervals) and the
                      squared deviations are divided by n-1.
* ``conventional`` -- textbook sample standard deviation of the n-1
                      intervals (mean over n-1, divide by n-2).

``literal`` is the default.  Pixels with fewer than two events get 0.

The streaming path does a single pass keeping (count, polarity sum, last
timestamp, sum of intervals, sum of squared intervals) per pixel and is
backed by a compiled kernel when available; ``compute_evrep`` is the
plain two-pass reference it is tested against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .stream import EventStream, StreamError, _frozen

from . import _accel_py

try:  # compiled kernel, falls back to numpy grouping
    from . import _accel
    KERNEL_BACKEND = "compiled"
except ImportError:  # pragma: no cover - depends on build environment
    _accel = None
    KERNEL_BACKEND = "python"


def _resolve_kernel(backend: str):
    if backend == "auto":
        return _accel if _accel is not None else _accel_py
    if backend == "compiled":
        if _accel is None:
            raise StreamError("compiled kernel is not available")
        return _accel
    if backend == "python":
        return _accel_py
    raise StreamError(f"unknown kernel backend {backend!r}")

ET_MODES = ("literal", "conventional")

CHANNEL_KINDS = ("count", "integral", "temporal", "refined_integral", "theta")


@dataclass(frozen=True)
class ChannelField:
    """One per-pixel scalar field with a declared kind."""

    values: np.ndarray  # float64, shape (height, width)
    kind: str

    def __post_init__(self):
        v = np.asarray(self.values, np.float64)
        if v.ndim != 2:
            raise StreamError("channel values must be 2-D")
        if self.kind not in CHANNEL_KINDS:
            raise StreamError(f"unknown channel kind {self.kind!r}")
        if self.kind == "count":
            if np.any(v < 0) or np.any(v != np.rint(v)):
                raise StreamError("count channel must hold non-negative integers")
        if self.kind in ("temporal", "theta") and np.any(v < 0):
            raise StreamError(f"{self.kind} channel must be non-negative")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class EvRep:
    """The three-channel bundle {integral, count, temporal}."""

    e_i: ChannelField
    e_c: ChannelField
    e_t: ChannelField

    def __post_init__(self):
        if not (self.e_i.values.shape == self.e_c.values.shape == self.e_t.values.shape):
            raise StreamError("channel dimensions disagree")
        if (self.e_i.kind, self.e_c.kind, self.e_t.kind) != ("integral", "count", "temporal"):
            raise StreamError("channel kinds must be integral/count/temporal")
        if np.any(np.abs(self.e_i.values) > self.e_c.values):
            raise StreamError("|integral| exceeds count somewhere")
        if np.any((self.e_i.values - self.e_c.values) % 2 != 0):
            raise StreamError("integral/count parity violated")

    @property
    def width(self) -> int:
        return self.e_c.width

    @property
    def height(self) -> int:
        return self.e_c.height

    def channels(self) -> list[np.ndarray]:
        return [self.e_i.values, self.e_c.values, self.e_t.values]


def _check_mode(mode: str):
    if mode not in ET_MODES:
        raise StreamError(f"unknown interval-spread mode {mode!r}")


def compute_e_c(stream: EventStream) -> ChannelField:
    """Event count per pixel."""
    npix = stream.width * stream.height
    counts = np.bincount(stream.pixel_index, minlength=npix)
    return ChannelField(counts.reshape(stream.height, stream.width).astype(np.float64),
                        "count")


def compute_e_i(stream: EventStream) -> ChannelField:
    """Signed polarity sum per pixel (positives minus negatives)."""
    npix = stream.width * stream.height
    sums = np.bincount(stream.pixel_index, weights=stream.p.astype(np.float64),
                       minlength=npix)
    return ChannelField(sums.reshape(stream.height, stream.width), "integral")


def compute_e_t(stream: EventStream, mode: str = "literal") -> ChannelField:
    """Spread of inter-event intervals per pixel, in microseconds.

    Two-pass: interval means first, then squared deviations.
    """
    _check_mode(mode)
    npix = stream.width * stream.height
    out = np.zeros(npix, np.float64)
    if len(stream) > 1:
        pix = stream.pixel_index
        order = np.argsort(pix, kind="stable")
        sp = pix[order]
        st = stream.t[order]
        same = sp[1:] == sp[:-1]
        d = (st[1:] - st[:-1]).astype(np.float64)[same]
        dq = sp[1:][same]
        n = np.bincount(pix, minlength=npix).astype(np.float64)
        m = n - 1.0  # intervals per pixel
        d_sum = np.bincount(dq, weights=d, minlength=npix)
        if mode == "literal":
            mean = np.divide(d_sum, n, out=np.zeros(npix), where=n > 0)
            denom = m
            active = n >= 2
        else:
            mean = np.divide(d_sum, m, out=np.zeros(npix), where=m > 0)
            denom = m - 1.0
            active = n >= 3
        dev = d - mean[dq]
        ss = np.bincount(dq, weights=dev * dev, minlength=npix)
        np.divide(ss, denom, out=out, where=active)
        np.sqrt(out, out=out)
    return ChannelField(out.reshape(stream.height, stream.width), "temporal")


def compute_evrep(stream: EventStream, mode: str = "literal") -> EvRep:
    """Reference path: the three channels computed independently."""
    return EvRep(compute_e_i(stream), compute_e_c(stream), compute_e_t(stream, mode))


def _et_from_moments(count, dt_sum, dt_sq, mode: str) -> np.ndarray:
    """Interval spread from (count, sum dt, sum dt^2) accumulators."""
    n = count.astype(np.float64)
    m = n - 1.0
    out = np.zeros_like(n)
    if mode == "literal":
        active = n >= 2
        mean = np.divide(dt_sum, n, out=np.zeros_like(n), where=active)
        ss = dt_sq - 2.0 * mean * dt_sum + m * mean * mean
        np.divide(ss, m, out=out, where=active)
    else:
        active = n >= 3
        ss = dt_sq - np.divide(dt_sum * dt_sum, m, out=np.zeros_like(n), where=m > 0)
        np.divide(ss, m - 1.0, out=out, where=active)
    np.maximum(out, 0.0, out=out)  # guard cancellation
    return np.sqrt(out)


def compute_evrep_streaming(stream: EventStream, mode: str = "literal",
                            backend: str = "auto") -> EvRep:
    """Single-pass accumulator path (compiled kernel when built)."""
    _check_mode(mode)
    count, pol, dt_sum, dt_sq = _resolve_kernel(backend).accumulate(
        stream.t, stream.x, stream.y, stream.p, stream.width, stream.height)
    shape = (stream.height, stream.width)
    return EvRep(
        ChannelField(pol.reshape(shape).astype(np.float64), "integral"),
        ChannelField(count.reshape(shape).astype(np.float64), "count"),
        ChannelField(_et_from_moments(count, dt_sum, dt_sq, mode).reshape(shape),
                     "temporal"),
    )
