import numpy as np
import pytest

from evkit import (CameraModel, EventStream, Frame, NoiseConfig, compute_evrep,
                   inject_noise, reconstruct_next, simulate_pair)
from evkit.estimate import (EvRepSL, SearchConfig, TrainingPair,
                            aggregate_theta, assemble_evrepsl, build_pairs,
                            estimate_k, estimate_theta_given_k, fit_camera,
                            refine_integral, worker_count)
from evkit.evrep import ChannelField
from evkit.io import parse_channels, write_channels
from evkit.stream import StreamError

from conftest import make_corpus, make_exact_pair


def exact_pair(seed=0, w=16, h=16, theta=0.1, k=0.05):
    rng = np.random.default_rng(seed)
    f0, f1, steps = make_exact_pair(rng, w, h, theta, k, 0, 10_000)
    model = CameraModel.uniform(w, h, theta, k)
    stream = simulate_pair(f0, f1, model, 0, 10_000)
    return TrainingPair(f0, f1, stream), model, steps


class TestThetaGivenK:
    def test_exact_recovery_zero_residual(self):
        pair, model, steps = exact_pair()
        theta = estimate_theta_given_k(pair, model.k)
        active = pair.active
        assert active.any()
        np.testing.assert_allclose(theta.values[active], 0.1, rtol=1e-12)

    def test_pure_noise_floored_to_zero(self):
        f = Frame(np.full((2, 2), 0.5), 0)
        f1 = Frame(f.values, 100)
        s = EventStream.from_arrays(2, 2, [10, 20, 30, 40], [0] * 4, [0] * 4,
                                    [1] * 4, 0, 100)
        theta = estimate_theta_given_k(TrainingPair(f, f1, s), 0.1)
        assert theta.values[0, 0] == 0.0

    def test_median_fill_inactive_pixel(self):
        # center pixel silent inside a patch of theta = 0.1
        w = h = 3
        f0 = np.full((h, w), 0.5)
        f1 = np.exp(0.1) * f0.copy()
        f1[1, 1] = f0[1, 1]  # no change -> no events at the center
        f1 = np.clip(f1, 0, 1)
        m = CameraModel.uniform(w, h, 0.1, 0.0)
        s = simulate_pair(Frame(f0, 0), Frame(np.clip(f1, 0, 1), 100), m, 0, 100)
        pair = TrainingPair(Frame(f0, 0), Frame(f1, 100), s)
        theta = estimate_theta_given_k(pair, 0.0)
        assert not pair.active[1, 1]
        assert theta.values[1, 1] == pytest.approx(0.1, rel=1e-9)

    def test_residual_bound(self):
        rng = np.random.default_rng(5)
        from conftest import smooth_field
        f0 = Frame(0.2 + 0.6 * smooth_field(rng, 16, 16), 0)
        f1 = Frame(0.2 + 0.6 * smooth_field(rng, 16, 16), 1000)
        theta_star, k_star = 0.05, 0.1
        m = CameraModel.uniform(16, 16, theta_star, k_star)
        s = simulate_pair(f0, f1, m, 0, 1000)
        pair = TrainingPair(f0, f1, s)
        est = estimate_theta_given_k(pair, k_star).values
        e_i = pair.e_i.values
        act = pair.active
        bound = theta_star / np.abs(e_i[act])
        assert np.all(np.abs(est[act] - theta_star) <= bound * (1 + 1e-9))


class TestEstimateK:
    def test_recovers_known_offset(self):
        pairs, _ = make_corpus(seed=1, n_pairs=8, width=32, height=32,
                               theta=0.05, k=0.05)
        k_hat, loss = estimate_k(pairs, 0.0, 2.0, 1e-3)
        assert abs(k_hat - 0.05) < 1e-3
        assert loss < 1e-4

    def test_flat_landscape_returns_k_min(self):
        f = Frame(np.full((4, 4), 0.5), 0)
        f1 = Frame(f.values, 100)
        pair = TrainingPair(f, f1, EventStream.empty(4, 4, 0, 100))
        with pytest.warns(UserWarning, match="single training pair"):
            k_hat, loss = estimate_k([pair], 0.0, 2.0, 1e-3)
        assert k_hat == 0.0
        assert loss == 0.0

    def test_boundary_range_warns(self):
        pairs, _ = make_corpus(seed=2, n_pairs=4, width=16, height=16,
                               theta=0.05, k=0.05)
        with pytest.warns(UserWarning, match="boundary"):
            k_hat, loss = estimate_k(pairs, 0.2, 0.4, 1e-3)
        assert k_hat == pytest.approx(0.2, abs=1e-3)
        _, loss_in_range = estimate_k(pairs, 0.0, 2.0, 1e-3)
        assert loss > loss_in_range

    def test_empty_pairs_rejected(self):
        with pytest.raises(StreamError):
            estimate_k([], 0.0, 1.0, 1e-3)

    def test_invalid_range_rejected(self):
        pair, _, _ = exact_pair()
        with pytest.raises(StreamError):
            estimate_k([pair], 0.5, 0.5, 1e-3)


class TestRefineIntegral:
    def test_quantization_bound(self):
        pair, model, _ = exact_pair(seed=3)
        refined = refine_integral(pair, model)
        assert np.all(np.abs(refined.values - pair.e_i.values) < 1.0)

    def test_identity_frames_all_zero(self):
        f = Frame(np.full((4, 4), 0.5), 0)
        f1 = Frame(f.values, 100)
        pair = TrainingPair(f, f1, EventStream.empty(4, 4, 0, 100))
        refined = refine_integral(pair, CameraModel.uniform(4, 4, 0.1, 0.0))
        assert np.all(refined.values == 0.0)

    def test_degenerate_theta_falls_back_to_raw(self):
        pair, _, _ = exact_pair(seed=4)
        zero_model = CameraModel(
            ChannelField(np.zeros((16, 16)), "theta"), 0.05)
        refined = refine_integral(pair, zero_model)
        assert np.array_equal(refined.values, pair.e_i.values)

    def test_reconstruction_commutes(self):
        pair, model, _ = exact_pair(seed=6)
        refined = refine_integral(pair, model)
        rec = reconstruct_next(pair.f0, refined, model)
        np.testing.assert_allclose(rec.raw, pair.f1.values, atol=1e-10)


class TestAssemble:
    def test_channel_order_round_trip(self):
        pair, model, _ = exact_pair(seed=7)
        rep = compute_evrep(pair.stream)
        refined = refine_integral(pair, model)
        sl = assemble_evrepsl(rep, refined, model.theta)
        blob = write_channels(sl.channels())
        chans = parse_channels(blob)
        assert len(chans) == 5
        order = [rep.e_i, rep.e_c, rep.e_t, refined, model.theta]
        for got, want in zip(chans, order):
            np.testing.assert_allclose(got, want.values.astype(np.float32))

    def test_negative_theta_rejected(self):
        with pytest.raises(StreamError):
            ChannelField(np.array([[-0.1]]), "theta")

    def test_dimension_mismatch(self):
        pair, model, _ = exact_pair(seed=8)
        rep = compute_evrep(pair.stream)
        small = ChannelField(np.zeros((2, 2)), "refined_integral")
        with pytest.raises(StreamError):
            assemble_evrepsl(rep, small, model.theta)


class TestFitCamera:
    def test_full_round_trip(self):
        pairs, model = make_corpus(seed=9, n_pairs=20, width=32, height=32,
                                   theta=0.15, k=0.05)
        res = fit_camera(pairs, SearchConfig(0.0, 2.0, 1e-8))
        assert abs(res.model.k - 0.05) < 1e-3
        active = np.zeros((32, 32), bool)
        for p in pairs:
            active |= p.active
        np.testing.assert_allclose(res.model.theta.values[active], 0.15,
                                   rtol=1e-6)
        assert res.pixels_active == int(active.sum())

    def test_noise_strictly_hurts(self):
        pairs, model = make_corpus(seed=10, n_pairs=10, width=32, height=32)
        clean = fit_camera(pairs, SearchConfig(0.0, 2.0, 1e-4))
        noisy_pairs = [
            TrainingPair(p.f0, p.f1,
                         inject_noise(p.stream, NoiseConfig(ba_rate=10, seed=i)))
            for i, p in enumerate(pairs)]
        noisy = fit_camera(noisy_pairs, SearchConfig(0.0, 2.0, 1e-4))
        assert noisy.mae_heldout > clean.mae_heldout

    def test_all_empty_streams_degenerate(self):
        f = Frame(np.full((4, 4), 0.5), 0)
        pairs = [TrainingPair(Frame(f.values, i * 100),
                              Frame(f.values, (i + 1) * 100),
                              EventStream.empty(4, 4, i * 100, (i + 1) * 100))
                 for i in range(4)]
        res = fit_camera(pairs)
        assert res.model.k == 0.0
        assert res.mae_heldout == 0.0
        assert res.pixels_active == 0
        assert np.all(res.model.theta.values == 0.0)


class TestBuildPairs:
    def test_slices_stream_along_frames(self):
        pairs, model = make_corpus(seed=11, n_pairs=3, width=8, height=8)
        frames = [pairs[0].f0] + [p.f1 for p in pairs]
        whole = EventStream.from_arrays(
            8, 8,
            np.concatenate([p.stream.t for p in pairs]),
            np.concatenate([p.stream.x for p in pairs]),
            np.concatenate([p.stream.y for p in pairs]),
            np.concatenate([p.stream.p for p in pairs]),
            frames[0].t, frames[-1].t)
        rebuilt = build_pairs(frames, whole)
        assert len(rebuilt) == 3
        for a, b in zip(rebuilt, pairs):
            assert np.array_equal(a.e_i.values, b.e_i.values)

    def test_needs_two_frames(self):
        with pytest.raises(StreamError):
            build_pairs([Frame(np.zeros((2, 2)))], EventStream.empty(2, 2))


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("EVKIT_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("EVKIT_THREADS", "0")
    assert worker_count() >= 1
