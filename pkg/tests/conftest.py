import numpy as np
import pytest

from evkit import CameraModel, Frame, simulate_pair
from evkit.estimate import TrainingPair


def smooth_field(rng, height, width, scale=1.0):
    """Low-frequency random field in [0, 1], no external deps."""
    yy, xx = np.mgrid[0:height, 0:width]
    out = np.zeros((height, width))
    for _ in range(4):
        fy, fx = rng.uniform(0.5, 3.0, 2)
        phase = rng.uniform(0, 2 * np.pi, 2)
        out += rng.uniform(0.2, 1.0) * np.cos(2 * np.pi * fy * yy / height + phase[0]) \
            * np.cos(2 * np.pi * fx * xx / width + phase[1])
    out -= out.min()
    ptp = np.ptp(out)
    return scale * (out / ptp if ptp > 0 else out)


def make_exact_pair(rng, width, height, theta, k, t0, t1, max_steps=5):
    """Frame pair whose log change is an exact multiple of theta per pixel,
    so simulation leaves zero quantization residual."""
    swing = np.exp(theta * max_steps)
    lo = max(0.05, k * (swing - 1.0) + 0.01)
    hi = (1.0 + k) / swing - k - 0.01
    assert lo < hi, "theta * max_steps too large for in-range frames"
    f0 = lo + (hi - lo) * smooth_field(rng, height, width)
    steps = np.rint(smooth_field(rng, height, width) * 2 * max_steps
                    - max_steps).astype(int)
    f1 = np.exp(theta * steps) * (f0 + k) - k
    assert f1.min() >= 0.0 and f1.max() <= 1.0
    return Frame(f0, t0), Frame(f1, t1), steps


def make_corpus(seed=42, n_pairs=20, width=64, height=64,
                theta=0.02, k=0.05, interval=10_000):
    """Noise-free training corpus with known parameters."""
    rng = np.random.default_rng(seed)
    model = CameraModel.uniform(width, height, theta, k)
    pairs = []
    t = 0
    for _ in range(n_pairs):
        f0, f1, _ = make_exact_pair(rng, width, height, theta, k, t, t + interval)
        stream = simulate_pair(f0, f1, model, t, t + interval)
        pairs.append(TrainingPair(f0, f1, stream))
        t += interval
    return pairs, model


@pytest.fixture(scope="session")
def corpus():
    return make_corpus()
