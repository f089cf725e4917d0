import math

import numpy as np
import pytest

from evkit import (CameraModel, Frame, TimingModel, compute_e_c, compute_e_i,
                   compute_e_t, log_intensity_ratio, reconstruct_next,
                   simulate_pair, simulate_sequence)
from evkit.stream import StreamError

from conftest import make_exact_pair, smooth_field


def const_frame(v, w=4, h=4, t=0):
    return Frame(np.full((h, w), float(v)), t)


class TestPair:
    def test_threshold_crossing_counts(self):
        f0 = const_frame(0.2, 1, 1)
        f1 = const_frame(0.2 * math.exp(0.3), 1, 1)
        m = CameraModel.uniform(1, 1, 0.1, 0.0)
        s = simulate_pair(f0, f1, m, 0, 1000)
        assert len(s) == 3
        assert np.all(s.p == 1)

    def test_no_change_no_events(self):
        f = const_frame(0.4)
        m = CameraModel.uniform(4, 4, 0.1, 0.0)
        s = simulate_pair(f, f, m, 0, 1000)
        assert len(s) == 0
        assert (s.t_start, s.t_end) == (0, 1000)

    def test_negative_change_with_residual(self):
        f0 = const_frame(0.4, 1, 1)
        f1 = const_frame(0.4 * math.exp(-0.25), 1, 1)
        m = CameraModel.uniform(1, 1, 0.1, 0.0)
        s = simulate_pair(f0, f1, m, 0, 1000)
        assert len(s) == 2
        assert np.all(s.p == -1)
        residual = -0.25 - (-2) * 0.1
        assert residual == pytest.approx(-0.05, abs=1e-12)

    def test_requires_positive_theta(self):
        f = const_frame(0.5)
        with pytest.raises(StreamError):
            simulate_pair(f, f, CameraModel.uniform(4, 4, 0.0, 0.0), 0, 10)

    def test_requires_forward_window(self):
        f = const_frame(0.5)
        m = CameraModel.uniform(4, 4, 0.1, 0.0)
        with pytest.raises(StreamError):
            simulate_pair(f, f, m, 10, 10)

    def test_timestamps_inside_window(self):
        rng = np.random.default_rng(0)
        f0, f1, _ = make_exact_pair(rng, 16, 16, 0.05, 0.1, 0, 5000)
        m = CameraModel.uniform(16, 16, 0.05, 0.1)
        for mode in ("uniform", "leading_edge"):
            s = simulate_pair(f0, f1, m, 0, 5000, TimingModel(mode))
            assert s.t.min() > 0 and s.t.max() <= 5000

    def test_uniform_timing_gives_zero_conventional_spread(self):
        f0 = const_frame(0.2, 1, 1)
        f1 = const_frame(0.2 * math.exp(0.5), 1, 1)
        m = CameraModel.uniform(1, 1, 0.1, 0.0)
        s = simulate_pair(f0, f1, m, 0, 10_000)
        assert len(s) == 5
        assert compute_e_t(s, "conventional").values[0, 0] == 0.0


class TestRoundTripProperties:
    def setup_method(self):
        rng = np.random.default_rng(1)
        self.theta, self.k = 0.05, 0.1
        self.f0 = Frame(0.2 + 0.6 * smooth_field(rng, 24, 24), 0)
        self.f1 = Frame(0.2 + 0.6 * smooth_field(rng, 24, 24), 8000)
        self.m = CameraModel.uniform(24, 24, self.theta, self.k)
        self.s = simulate_pair(self.f0, self.f1, self.m, 0, 8000)

    def test_quantization_bound(self):
        delta = log_intensity_ratio(self.f0, self.f1, self.k).values
        e_i = compute_e_i(self.s).values
        assert np.all(np.abs(delta - self.theta * e_i) < self.theta * (1 + 1e-6))

    def test_sign_agreement(self):
        delta = log_intensity_ratio(self.f0, self.f1, self.k).values
        e_i = compute_e_i(self.s).values
        nz = e_i != 0
        assert np.all(np.sign(e_i[nz]) == np.sign(delta[nz]))

    def test_reconstruction_bound(self):
        e_i = compute_e_i(self.s)
        rec = reconstruct_next(self.f0, e_i, self.m)
        bound = (self.f1.values + self.k) * (math.exp(self.theta) - 1.0)
        assert np.all(np.abs(rec.raw - self.f1.values) <= bound * (1 + 1e-9))

    def test_reversal_symmetry(self):
        back = simulate_pair(self.f1, self.f0, self.m, 0, 8000)
        assert np.array_equal(compute_e_c(back).values,
                              compute_e_c(self.s).values)
        assert np.array_equal(compute_e_i(back).values,
                              -compute_e_i(self.s).values)

    def test_determinism(self):
        again = simulate_pair(self.f0, self.f1, self.m, 0, 8000)
        assert again == self.s


class TestSequence:
    def test_two_frames_equals_pair(self):
        rng = np.random.default_rng(2)
        f0, f1, _ = make_exact_pair(rng, 8, 8, 0.05, 0.1, 0, 1000)
        m = CameraModel.uniform(8, 8, 0.05, 0.1)
        assert simulate_sequence([f0, f1], m) == simulate_pair(f0, f1, m, 0, 1000)

    def test_constant_sequence_empty(self):
        m = CameraModel.uniform(4, 4, 0.1, 0.0)
        frames = [const_frame(0.5, t=i * 100) for i in range(4)]
        s = simulate_sequence(frames, m)
        assert len(s) == 0
        assert (s.t_start, s.t_end) == (0, 300)

    def test_telescoping_middle_frame(self):
        # middle frame equal to the first: pair (f1, f3) carries all counts
        rng = np.random.default_rng(3)
        f0, f2, _ = make_exact_pair(rng, 8, 8, 0.05, 0.1, 0, 2000)
        f1 = Frame(f0.values, 1000)
        m = CameraModel.uniform(8, 8, 0.05, 0.1)
        seq = simulate_sequence([f0, f1, f2], m)
        direct = simulate_pair(f0, f2, m, 0, 2000)
        assert np.array_equal(compute_e_i(seq).values,
                              compute_e_i(direct).values)

    def test_too_few_frames(self):
        with pytest.raises(StreamError):
            simulate_sequence([const_frame(0.5)], CameraModel.uniform(4, 4, 0.1, 0))

    def test_non_increasing_timestamps(self):
        frames = [const_frame(0.5, t=10), const_frame(0.5, t=10)]
        with pytest.raises(StreamError):
            simulate_sequence(frames, CameraModel.uniform(4, 4, 0.1, 0))
