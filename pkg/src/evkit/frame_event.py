"""Frame-event relation: map a frame across an event interval and back.

Given a per-pixel threshold field theta and the scalar intensity offset
k, the next frame is exp(theta * integral) * (f0 + k) - k; the previous
frame is the same map with the integral negated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .evrep import ChannelField
from .stream import Frame, StreamError, _frozen


@dataclass(frozen=True)
class CameraModel:
    """Per-pixel contrast threshold field plus the scalar offset ratio k."""

    theta: ChannelField
    k: float

    def __post_init__(self):
        if self.theta.kind != "theta":
            raise StreamError("threshold field must have kind 'theta'")
        if self.k < 0:
            raise StreamError("offset k must be non-negative")

    @property
    def width(self) -> int:
        return self.theta.width

    @property
    def height(self) -> int:
        return self.theta.height

    @classmethod
    def uniform(cls, width: int, height: int, theta: float, k: float) -> "CameraModel":
        return cls(ChannelField(np.full((height, width), float(theta)), "theta"),
                   float(k))


@dataclass(frozen=True)
class Reconstruction:
    """Clamped output frame plus the raw pre-clamp values."""

    frame: Frame
    raw: np.ndarray
    clamp_count: int


def _check_dims(a, b, what: str):
    if a.values.shape != b.values.shape:
        raise StreamError(f"{what}: dimensions disagree "
                          f"{a.values.shape} vs {b.values.shape}")


def log_intensity_ratio(f0: Frame, f1: Frame, k: float) -> ChannelField:
    """Per-pixel ln((f1+k)/(f0+k))."""
    _check_dims(f0, f1, "log_intensity_ratio")
    for name, f in (("f0", f0), ("f1", f1)):
        bad = f.values + k <= 0.0
        if np.any(bad):
            y, x = np.argwhere(bad)[0]
            raise StreamError(f"log of non-positive value: {name}+k = 0 "
                              f"at pixel ({x},{y})")
    return ChannelField(np.log((f1.values + k) / (f0.values + k)),
                        "refined_integral")


def _apply(f_vals: np.ndarray, e_i: ChannelField, model: CameraModel,
           sign: float) -> Reconstruction:
    raw = np.exp(sign * model.theta.values * e_i.values) * (f_vals + model.k) - model.k
    clamped = np.clip(raw, 0.0, 1.0)
    clamp_count = int(np.count_nonzero(clamped != raw))
    return Reconstruction(Frame(clamped), _frozen(raw), clamp_count)


def reconstruct_next(f0: Frame, e_i: ChannelField, model: CameraModel) -> Reconstruction:
    """Estimate the frame at the end of the interval from f0 and the integral."""
    _check_dims(f0, e_i, "reconstruct_next")
    _check_dims(f0, model.theta, "reconstruct_next")
    return _apply(f0.values, e_i, model, +1.0)


def reconstruct_prev(f1: Frame, e_i: ChannelField, model: CameraModel) -> Reconstruction:
    """Inverse direction: estimate the frame at the start of the interval."""
    _check_dims(f1, e_i, "reconstruct_prev")
    _check_dims(f1, model.theta, "reconstruct_prev")
    return _apply(f1.values, e_i, model, -1.0)


def reconstruction_mae(pairs: Sequence[tuple[Frame, Frame, ChannelField]],
                       model: CameraModel) -> float:
    """Mean absolute error of the forward reconstruction over all pairs.

    Uses pre-clamp values so the objective is smooth in the parameters.
    """
    if not pairs:
        raise StreamError("reconstruction_mae needs at least one pair")
    total, count = 0.0, 0
    for f0, f1, e_i in pairs:
        rec = reconstruct_next(f0, e_i, model)
        total += float(np.abs(rec.raw - f1.values).sum())
        count += f1.values.size
    return total / count
