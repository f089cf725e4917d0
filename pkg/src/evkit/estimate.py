"""Self-supervised camera-parameter estimation.

Given frame pairs with their in-between event streams, the threshold
field is analytically identifiable per pixel once the offset k is fixed:
theta = ln((f1+k)/(f0+k)) / integral wherever the integral is non-zero.
That collapses the reconstruction-error objective to a 1-D minimization
over k, solved with a coarse log grid followed by golden-section
refinement.  The refined integral channel and the 5-channel bundle are
assembled from the fitted model.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .evrep import ChannelField, EvRep, compute_e_i, compute_evrep
from .frame_event import CameraModel, log_intensity_ratio, reconstruct_next, \
    reconstruction_mae
from .stream import EventStream, Frame, StreamError

THETA_EPS = 1e-6  # below this the threshold is treated as degenerate

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def worker_count() -> int:
    """Worker cap from EVKIT_THREADS (0 or unset = auto)."""
    raw = os.environ.get("EVKIT_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


@dataclass(frozen=True)
class TrainingPair:
    """A frame pair and the events between them."""

    f0: Frame
    f1: Frame
    stream: EventStream

    def __post_init__(self):
        if self.f0.values.shape != self.f1.values.shape:
            raise StreamError("frame dimensions disagree")
        if (self.stream.width, self.stream.height) != (self.f0.width, self.f0.height):
            raise StreamError("stream dimensions disagree with frames")
        if (self.stream.t_start, self.stream.t_end) != (self.f0.t, self.f1.t):
            raise StreamError("stream window must match the frame timestamps")
        object.__setattr__(self, "_e_i", compute_e_i(self.stream))

    @property
    def e_i(self) -> ChannelField:
        return self._e_i

    @property
    def active(self) -> np.ndarray:
        return self.e_i.values != 0


@dataclass(frozen=True)
class EvRepSL:
    """Five-channel bundle: the three stream statistics plus the learned
    refined integral and threshold field."""

    e_i: ChannelField
    e_c: ChannelField
    e_t: ChannelField
    e_i_refined: ChannelField
    theta: ChannelField

    def __post_init__(self):
        shapes = {c.values.shape for c in self.channels_fields()}
        if len(shapes) != 1:
            raise StreamError("channel dimensions disagree")
        if self.theta.kind != "theta":
            raise StreamError("threshold channel must have kind 'theta'")

    def channels_fields(self):
        return [self.e_i, self.e_c, self.e_t, self.e_i_refined, self.theta]

    def channels(self) -> list[np.ndarray]:
        return [c.values for c in self.channels_fields()]


@dataclass(frozen=True)
class SearchConfig:
    k_min: float = 0.0
    k_max: float = 2.0
    tolerance: float = 1e-4
    grid_points: int = 33

    def __post_init__(self):
        if not (0.0 <= self.k_min < self.k_max):
            raise StreamError("need 0 <= k_min < k_max")
        if self.tolerance <= 0:
            raise StreamError("tolerance must be positive")
        if self.grid_points < 3:
            raise StreamError("grid needs at least 3 points")


@dataclass(frozen=True)
class FitResult:
    model: CameraModel
    mae_heldout: float
    pixels_active: int
    clamp_count: int


def _neighborhood_fill(values: np.ndarray, known: np.ndarray) -> np.ndarray:
    """Fill unknown pixels with the median of nearby known values.

    Tries a 3x3 window, then 5x5, then the global median; 0 when nothing
    is known anywhere.
    """
    out = values.copy()
    if known.all():
        return out
    known_vals = values[known]
    global_fill = float(np.median(known_vals)) if known_vals.size else 0.0
    h, w = values.shape
    for yy, xx in np.argwhere(~known):
        fill = None
        for r in (1, 2):
            win_v = values[max(yy - r, 0):yy + r + 1, max(xx - r, 0):xx + r + 1]
            win_k = known[max(yy - r, 0):yy + r + 1, max(xx - r, 0):xx + r + 1]
            if win_k.any():
                fill = float(np.median(win_v[win_k]))
                break
        out[yy, xx] = global_fill if fill is None else fill
    return out


def _closed_form_theta(pair: TrainingPair, k: float) -> np.ndarray:
    """Per-pixel ratio/integral at active pixels, NaN elsewhere or where
    the closed form comes out negative (noise)."""
    ratio = log_intensity_ratio(pair.f0, pair.f1, k).values
    e_i = pair.e_i.values
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = ratio / e_i
    theta[~pair.active] = np.nan
    theta[theta < 0] = np.nan
    return theta


def estimate_theta_given_k(pair: TrainingPair, k: float) -> ChannelField:
    """Closed-form threshold field for one pair at a fixed offset k.

    Negative closed-form values (frame change opposing the net polarity)
    are floored to 0; inactive pixels take a neighborhood median fill.
    """
    ratio = log_intensity_ratio(pair.f0, pair.f1, k).values
    e_i = pair.e_i.values
    active = pair.active
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = np.where(active, ratio / np.where(active, e_i, 1.0), 0.0)
    np.maximum(theta, 0.0, out=theta)
    return ChannelField(_neighborhood_fill(theta, active), "theta")


def aggregate_theta(pairs: Sequence[TrainingPair], k: float) -> ChannelField:
    """Per-pixel median of the closed-form thresholds across pairs.

    Only pixels active in a pair contribute there, negatives are
    excluded; pixels active in no pair are median-filled.
    """
    stack = np.stack([_closed_form_theta(p, k) for p in pairs])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN columns
        med = np.nanmedian(stack, axis=0)
    known = ~np.isnan(med)
    med[~known] = 0.0
    return ChannelField(_neighborhood_fill(med, known), "theta")


def _heldout_loss(fit_pairs, eval_pairs, k: float) -> float:
    try:
        model = CameraModel(aggregate_theta(fit_pairs, k), k)
        triples = [(p.f0, p.f1, p.e_i) for p in eval_pairs]
        return reconstruction_mae(triples, model)
    except StreamError:
        # e.g. k=0 with zero-valued frame pixels: outside the log domain
        return math.inf


def _split(pairs: Sequence[TrainingPair]):
    fit, heldout = list(pairs[::2]), list(pairs[1::2])
    if not heldout:
        warnings.warn("single training pair: held-out set equals the fit set")
        heldout = fit
    return fit, heldout


def estimate_k(pairs: Sequence[TrainingPair], k_min: float = 0.0,
               k_max: float = 2.0, tolerance: float = 1e-4,
               grid_points: int = 33) -> tuple[float, float]:
    """Minimize the held-out reconstruction error over the offset k.

    Coarse log-spaced grid, then golden-section refinement on the best
    bracket; ties break to the smallest k.
    """
    if not pairs:
        raise StreamError("estimate_k needs at least one pair")
    cfg = SearchConfig(k_min, k_max, tolerance, grid_points)
    fit_pairs, eval_pairs = _split(pairs)

    if k_min == 0.0:
        grid = np.concatenate([[0.0], np.geomspace(max(1e-4, tolerance / 10),
                                                   k_max, grid_points - 1)])
    else:
        grid = np.geomspace(k_min, k_max, grid_points)

    cache: dict[float, float] = {}

    def loss(k: float) -> float:
        k = float(k)
        if k not in cache:
            cache[k] = _heldout_loss(fit_pairs, eval_pairs, k)
        return cache[k]

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        losses = list(pool.map(_heldout_loss,
                               [fit_pairs] * len(grid),
                               [eval_pairs] * len(grid), grid))
    for k, l in zip(grid, losses):
        cache[float(k)] = l

    best = int(np.argmin(losses))  # first minimum = smallest k on the grid
    a = float(grid[max(best - 1, 0)])
    b = float(grid[min(best + 1, len(grid) - 1)])

    # golden-section refinement
    c = b - (b - a) * _GOLDEN
    d = a + (b - a) * _GOLDEN
    while b - a > cfg.tolerance:
        if loss(c) <= loss(d):
            b, d = d, c
            c = b - (b - a) * _GOLDEN
        else:
            a, c = c, d
            d = a + (b - a) * _GOLDEN

    # smallest k among the lowest losses evaluated anywhere
    best_loss = min(cache.values())
    k_hat = min(k for k, l in cache.items() if l == best_loss)

    spread = max(losses) - min(losses)
    flat = not math.isfinite(spread) or spread <= 1e-12 * max(1.0, max(losses))
    if not flat and (k_hat <= cfg.k_min + cfg.tolerance
                     or k_hat >= cfg.k_max - cfg.tolerance):
        warnings.warn(f"k search hit the bracket boundary: k={k_hat:.6g} "
                      f"in [{cfg.k_min}, {cfg.k_max}]")
    return k_hat, cache[k_hat]


def refine_integral(pair: TrainingPair, model: CameraModel) -> ChannelField:
    """Continuous integral: log-ratio divided by the threshold field.

    Falls back to the raw integral where the threshold is degenerate.
    """
    ratio = log_intensity_ratio(pair.f0, pair.f1, model.k).values
    theta = model.theta.values
    usable = theta > THETA_EPS
    refined = np.where(usable, ratio / np.where(usable, theta, 1.0),
                       pair.e_i.values)
    return ChannelField(refined, "refined_integral")


def assemble_evrepsl(evrep: EvRep, refined: ChannelField,
                     theta: ChannelField) -> EvRepSL:
    if refined.values.shape != evrep.e_i.values.shape \
            or theta.values.shape != evrep.e_i.values.shape:
        raise StreamError("channel dimensions disagree")
    return EvRepSL(evrep.e_i, evrep.e_c, evrep.e_t, refined, theta)


def fit_camera(pairs: Sequence[TrainingPair],
               config: SearchConfig = SearchConfig()) -> FitResult:
    """Full fit: search k, aggregate the threshold field over all pairs."""
    if not pairs:
        raise StreamError("fit_camera needs at least one pair")
    k_hat, mae = estimate_k(pairs, config.k_min, config.k_max,
                            config.tolerance, config.grid_points)
    theta = aggregate_theta(pairs, k_hat)
    model = CameraModel(theta, k_hat)

    active_any = np.zeros((pairs[0].f0.height, pairs[0].f0.width), bool)
    clamp_count = 0
    for p in pairs:
        active_any |= p.active
        clamp_count += reconstruct_next(p.f0, p.e_i, model).clamp_count
    return FitResult(model, mae, int(active_any.sum()), clamp_count)


def build_pairs(frames: Sequence[Frame], stream: EventStream) -> list[TrainingPair]:
    """Slice one event stream into pairs along a timestamped frame sequence."""
    from .stream import slice_by_time
    if len(frames) < 2:
        raise StreamError("need at least two frames")
    pairs = []
    for f0, f1 in zip(frames, frames[1:]):
        if f1.t <= f0.t:
            raise StreamError("frame timestamps must be strictly increasing")
        pairs.append(TrainingPair(f0, f1, slice_by_time(stream, f0.t, f1.t)))
    return pairs
