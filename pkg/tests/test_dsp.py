"""Signal pipeline tests: STFT vs naive DFT, resampler passband/stopband,
noise estimation/subtraction, chunking, and feature assembly."""

import numpy as np
import pytest

from vibroloc.dsp import (
    NoiseProfile,
    PipelineConfig,
    SpectrogramTensor,
    build_features,
    chunk_stroke,
    design_antialias_filter,
    estimate_noise,
    magnitude_db_normalized,
    resample,
    standardize,
    stft,
    stft_frame_count,
    subtract_noise,
    trim_window,
)
from vibroloc.recording import (
    ContactLabel,
    Recording,
    trajectory_mean_position,
    trajectory_position,
)


def naive_dft_frames(x, n_fft, hop, win):
    """O(n^2) STFT oracle: direct DFT of each windowed frame."""
    n_frames = 1 + (len(x) - n_fft) // hop
    k = np.arange(n_fft // 2 + 1)
    n = np.arange(n_fft)
    basis = np.exp(-2j * np.pi * np.outer(k, n) / n_fft)
    out = np.empty((n_frames, n_fft // 2 + 1), dtype=complex)
    for t in range(n_frames):
        seg = x[t * hop:t * hop + n_fft] * win
        out[t] = basis @ seg
    return out


def fit_sine_amplitude(x, freq_hz, rate):
    """Least-squares amplitude of a known-frequency sinusoid."""
    t = np.arange(len(x)) / rate
    design = np.column_stack([np.sin(2 * np.pi * freq_hz * t),
                              np.cos(2 * np.pi * freq_hz * t)])
    coef, *_ = np.linalg.lstsq(design, x, rcond=None)
    return float(np.hypot(*coef))


def make_impulse_recording(channels, rate=20000):
    return Recording(
        channels=channels,
        sample_rate=rate,
        trigger_offset_ms=200.0,
        label=ContactLabel(kind="impulse", material="metal", view="Front",
                           region="hand", position_mm=np.zeros(3)),
    )


# ---------------------------------------------------------------- resample


def test_resample_dc_passthrough():
    x = np.full(25000, 0.7)
    y = resample(x, 50000, 20000)
    assert len(y) == 10000
    interior = y[200:-200]
    # Polyphase branches of the 60 dB design differ in DC gain by ~1e-5,
    # well inside the 1% passband tolerance.
    assert np.allclose(interior, 0.7, atol=7e-4)


def test_resample_tone_amplitude_preserved():
    rate, tone = 50000, 3000.0
    t = np.arange(25000) / rate
    y = resample(np.sin(2 * np.pi * tone * t), rate, 20000)
    amp = fit_sine_amplitude(y[500:-500], tone, 20000)
    assert abs(amp - 1.0) < 0.01


def test_resample_stopband_tone_rejected():
    rate, tone = 50000, 24000.0
    t = np.arange(25000) / rate
    y = resample(np.sin(2 * np.pi * tone * t), rate, 20000)
    assert np.sqrt(np.mean(y[500:-500] ** 2)) <= 0.01


def test_resample_output_length_formula():
    rng = np.random.default_rng(0)
    for length, fr, to in [(25000, 50000, 20000), (1001, 50000, 20000),
                           (4000, 20000, 4000), (777, 20000, 20000)]:
        y = resample(rng.standard_normal(length), fr, to)
        assert len(y) == -(-length * to // fr)  # ceil


def test_resample_group_delay_compensated():
    # A pulse in the middle must stay in the middle after resampling.
    x = np.zeros(25000)
    x[12500] = 1.0
    y = resample(x, 50000, 20000)
    assert abs(int(np.argmax(np.abs(y))) - 5000) <= 1


def test_resample_linearity():
    rng = np.random.default_rng(7)
    x = rng.standard_normal(5000)
    y = rng.standard_normal(5000)
    a, b = 0.37, -1.2
    lhs = resample(a * x + b * y, 50000, 20000)
    rhs = a * resample(x, 50000, 20000) + b * resample(y, 50000, 20000)
    assert np.max(np.abs(lhs - rhs)) < 1e-9


def test_resample_rejects_upsampling_and_bad_rates():
    with pytest.raises(ValueError):
        resample(np.zeros(100), 20000, 50000)
    with pytest.raises(ValueError):
        resample(np.zeros(100), 0, 0)
    with pytest.raises(ValueError):
        resample(np.array([np.nan]), 50000, 20000)


def test_antialias_filter_meets_design_targets():
    taps = design_antialias_filter(50000, 20000)
    assert len(taps) % 2 == 1
    freqs = np.fft.rfftfreq(1 << 16, d=1.0 / 100000)
    resp = np.abs(np.fft.rfft(taps, 1 << 16))
    stop = resp[freqs >= 10000]
    passband = resp[freqs <= 0.4 * 20000]
    assert 20 * np.log10(stop.max()) <= -58.0  # 60 dB design target
    assert np.max(np.abs(passband - 1.0)) < 0.01


# ---------------------------------------------------------------- trim


def test_trim_window_default_sample_count():
    rec = make_impulse_recording(np.zeros((7, 10000)), rate=20000)  # 500 ms
    out = trim_window(rec)
    assert out.n_samples == 4000
    assert out.trigger_offset_ms == 75.0


def test_trim_window_identity_and_range_error():
    rec = make_impulse_recording(np.zeros((7, 10000)), rate=20000)
    same = trim_window(rec, 0.0, 500.0)
    assert same.n_samples == rec.n_samples
    with pytest.raises(ValueError):
        trim_window(rec, 300.0, 600.0)


# ---------------------------------------------------------------- stft


def test_stft_dc_concentrates_in_bin0():
    frames = stft(np.ones(128), n_fft=128, hop=64, window="rectangular")
    assert frames.shape == (1, 65)
    assert abs(abs(frames[0, 0]) - 128.0) < 1e-9
    assert np.all(np.abs(frames[0, 1:]) < 1e-9)


def test_stft_integer_bin_sine():
    n_fft = 128
    n = np.arange(4 * n_fft)
    x = np.sin(2 * np.pi * 8 * n / n_fft)
    frames = stft(x, n_fft=n_fft, hop=64, window="rectangular")
    mags = np.abs(frames)
    assert np.allclose(mags[:, 8], 64.0, atol=1e-9)
    off_bins = np.delete(np.arange(65), [7, 8, 9])
    assert np.all(mags[:, off_bins] < 1e-6)


def test_stft_matches_naive_dft():
    rng = np.random.default_rng(123)
    x = rng.standard_normal(512)
    for window in ("rectangular", "hann"):
        win = (np.ones(128) if window == "rectangular"
               else 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(128) / 128))
        got = stft(x, n_fft=128, hop=64, window=window)
        want = naive_dft_frames(x, 128, 64, win)
        assert got.shape == want.shape
        assert np.max(np.abs(got - want)) < 1e-9


def test_stft_frame_count_formula():
    for length, n_fft, hop in [(4000, 128, 64), (128, 128, 64), (129, 128, 1), (500, 64, 32)]:
        frames = stft(np.zeros(length), n_fft=n_fft, hop=hop, window="rectangular")
        assert frames.shape[0] == stft_frame_count(length, n_fft, hop) == 1 + (length - n_fft) // hop


def test_stft_parseval_rectangular():
    rng = np.random.default_rng(5)
    n_fft = 128
    x = rng.standard_normal(4 * n_fft)
    frames = stft(x, n_fft=n_fft, hop=n_fft, window="rectangular")
    power = np.abs(frames) ** 2
    doubled = power[:, 0] + power[:, -1] + 2 * power[:, 1:-1].sum(axis=1)
    assert np.allclose(doubled.sum(), n_fft * np.sum(x ** 2), rtol=1e-6)


def test_stft_too_short_errors():
    with pytest.raises(ValueError):
        stft(np.zeros(100), n_fft=128)


# ---------------------------------------------------------------- dB


def test_db_normalization_basics():
    assert np.allclose(magnitude_db_normalized(np.array([1.0, 1.0, 1.0])), 0.0)
    out = magnitude_db_normalized(np.array([10.0, 1.0]))
    assert np.allclose(out, [0.0, -20.0])
    with pytest.raises(ValueError):
        magnitude_db_normalized(np.zeros(4))


# ---------------------------------------------------------------- noise


def test_estimate_noise_zero_input():
    rec = make_impulse_recording(np.zeros((7, 10000)))
    prof = estimate_noise(rec)
    assert prof.data.shape == (7, 65)
    assert np.all(prof.data == 0)


def test_estimate_noise_stationary_tone_stability():
    rate, n_fft = 20000, 128
    bin_k = 16
    tone = bin_k * rate / n_fft
    t = np.arange(10000) / rate
    ch = np.tile(np.sin(2 * np.pi * tone * t), (7, 1)) * 0.5
    rec = make_impulse_recording(ch)
    prof = estimate_noise(rec, noise_ms=100.0)
    assert np.argmax(prof.data[0]) == bin_k
    # Frame-to-frame stability of the dominant bin: < 5% spread.
    frames = np.abs(stft(ch[0][:2000], n_fft, 64, "hann"))[:, bin_k]
    assert frames.std() / frames.mean() < 0.05
    # Window-dependent constant: amplitude * coherent gain * n_fft / 2.
    assert abs(prof.data[0, bin_k] - 0.5 * 0.5 * n_fft / 2) / (0.5 * 0.5 * n_fft / 2) < 0.05


def test_estimate_noise_white_noise_roughly_flat():
    rng = np.random.default_rng(42)
    ch = np.clip(rng.normal(0.0, 0.1, (7, 10000)), -1, 1)
    prof = estimate_noise(make_impulse_recording(ch), noise_ms=100.0)
    # Exclude the half-weight edge bins; interior bins share one scale.
    interior = prof.data[:, 1:-1]
    assert interior.max() / interior.min() < 3.0


def test_estimate_noise_insufficient_samples():
    rec = make_impulse_recording(np.zeros((7, 10000)))
    with pytest.raises(ValueError):
        estimate_noise(rec, noise_ms=2.0)  # 40 samples < n_fft


def test_subtract_noise_identity_zero_and_floor():
    spec = SpectrogramTensor(np.abs(np.random.default_rng(0).standard_normal((7, 10, 65))),
                             frame_rate=312.5, bin_width=156.25)
    zero = NoiseProfile(np.zeros((7, 65)))
    out = subtract_noise(spec, zero)
    assert np.array_equal(out.data, spec.data)

    const = SpectrogramTensor(np.tile(np.linspace(0, 1, 65), (7, 10, 1)),
                              frame_rate=312.5, bin_width=156.25)
    prof = NoiseProfile(const.data[:, 0, :].copy())
    assert np.all(subtract_noise(const, prof).data == 0)


def test_subtract_noise_bounds_and_shape_error():
    rng = np.random.default_rng(3)
    spec = SpectrogramTensor(np.abs(rng.standard_normal((7, 12, 65))),
                             frame_rate=312.5, bin_width=156.25)
    prof = NoiseProfile(np.abs(rng.standard_normal((7, 65))) * 0.3)
    out = subtract_noise(spec, prof)
    assert np.all(out.data >= 0)
    assert np.all(out.data <= spec.data)
    with pytest.raises(ValueError):
        subtract_noise(spec, NoiseProfile(np.zeros((7, 33))))


# ---------------------------------------------------------------- chunking


def make_stroke_recording(n_samples, traj, rate=20000):
    return Recording(
        channels=np.zeros((7, n_samples)),
        sample_rate=rate,
        trigger_offset_ms=100.0,
        label=ContactLabel(kind="stroke", material="wood", view="Front",
                           region="forearm", trajectory_mm=traj),
    )


def test_chunk_counts_and_truncation():
    traj = np.array([[0.0, 0, 0, 0], [2000.0, 10, 0, 0]])
    rec = make_stroke_recording(20000, traj)  # 1000 ms
    assert len(chunk_stroke(rec, 200.0)) == 5
    rec2 = make_stroke_recording(21800, traj)  # 1090 ms
    chunks = chunk_stroke(rec2, 200.0)
    assert len(chunks) == 5
    assert all(seg.n_samples == 4000 for seg, _ in chunks)
    short = make_stroke_recording(3000, traj)
    assert chunk_stroke(short) == []


def test_chunk_targets_linear_ramp():
    # x(t) = 0.01 * t mm over the first chunk -> mean x = 1.0 mm.
    traj = np.array([[0.0, 0.0, 0, 0], [2000.0, 20.0, 0, 0]])
    rec = make_stroke_recording(20000, traj)
    chunks = chunk_stroke(rec, 200.0)
    assert abs(chunks[0][1][0] - 1.0) < 1e-9
    assert abs(chunks[2][1][0] - 5.0) < 1e-9


def test_chunk_time_reversal_symmetry():
    rng = np.random.default_rng(11)
    traj = np.column_stack([
        np.sort(rng.uniform(0, 1000.0, 6)),
        rng.uniform(-50, 50, (6, 3)),
    ])
    traj[0, 0], traj[-1, 0] = 0.0, 1000.0
    rec = make_stroke_recording(20000, traj)
    rev_traj = np.column_stack([1000.0 - traj[::-1, 0], traj[::-1, 1:]])
    rev = make_stroke_recording(20000, rev_traj)
    fwd_targets = [t for _, t in chunk_stroke(rec, 200.0)]
    rev_targets = [t for _, t in chunk_stroke(rev, 200.0)]
    for a, b in zip(fwd_targets, rev_targets[::-1]):
        assert np.allclose(a, b, atol=1e-9)


def test_chunk_requires_stroke_label():
    rec = make_impulse_recording(np.zeros((7, 10000)))
    with pytest.raises(ValueError):
        chunk_stroke(rec)


def test_trajectory_mean_matches_quadrature():
    rng = np.random.default_rng(2)
    traj = np.column_stack([np.array([0.0, 130.0, 420.0, 990.0]),
                            rng.uniform(-10, 10, (4, 3))])
    t0, t1 = 50.0, 700.0
    got = trajectory_mean_position(traj, t0, t1)
    ts = np.linspace(t0, t1, 200001)
    want = trajectory_position(traj, ts).mean(axis=0)
    assert np.allclose(got, want, atol=1e-6)


# ---------------------------------------------------------------- features


def test_build_features_default_shapes():
    rng = np.random.default_rng(1)
    rec = make_impulse_recording(np.clip(rng.normal(0, 0.05, (7, 25000)), -1, 1), rate=50000)
    feats = build_features(rec)
    assert feats.data.shape == (7, 61, 65)
    assert feats.frame_rate == 20000 / 64
    assert feats.bin_width == 20000 / 128


def test_build_features_stroke_chunk_shape():
    traj = np.array([[0.0, 0, 0, 0], [2000.0, 10, 0, 0]])
    rec = make_stroke_recording(24000, traj)
    parent_profile = estimate_noise(rec, 100.0)
    seg, _ = chunk_stroke(rec, 200.0)[0]
    feats = build_features(seg, noise_profile=parent_profile)
    assert feats.data.shape == (7, 61, 65)


def test_build_features_silent_recording_zero():
    rec = make_impulse_recording(np.zeros((7, 25000)), rate=50000)
    feats = build_features(rec)
    assert np.all(feats.data == 0)


def test_build_features_deterministic():
    rng = np.random.default_rng(9)
    ch = np.clip(rng.normal(0, 0.05, (7, 25000)), -1, 1)
    rec = make_impulse_recording(ch, rate=50000)
    a = build_features(rec)
    b = build_features(make_impulse_recording(ch.copy(), rate=50000))
    assert np.array_equal(a.data, b.data)


def test_standardize_zero_mean_unit_scale():
    rng = np.random.default_rng(4)
    spec = SpectrogramTensor(np.abs(rng.standard_normal((7, 61, 65))),
                             frame_rate=312.5, bin_width=156.25)
    z = standardize(spec)
    assert abs(z.mean()) < 1e-12
    assert abs(z.std() - 1.0) < 1e-3
    assert np.all(standardize(np.zeros((7, 61, 65))) == 0)


def test_pipeline_config_round_trip(tmp_path):
    cfg = PipelineConfig(target_rate_hz=4000, n_fft=64, hop=16, window="rectangular",
                         trim_start_ms=100.0, trim_end_ms=300.0, noise_ms=80.0)
    path = tmp_path / "pipeline.cfg"
    cfg.to_file(path)
    assert PipelineConfig.from_file(path) == cfg
    with pytest.raises(ValueError):
        PipelineConfig(n_fft=127)
