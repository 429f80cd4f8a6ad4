"""Preprocessing pipeline: resampling, windowing, STFT, noise subtraction,
stroke chunking and feature-tensor assembly.

All operations are pure functions on immutable inputs. The full pipeline for
one recording is ``resample -> trim -> per-channel STFT -> magnitude ->
noise subtraction``, producing a nonnegative C x T x F tensor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import signal as sps

from .recording import Recording, trajectory_mean_position, trajectory_position

DB_EPS = 1e-12

# Anti-alias FIR design targets: 60 dB stopband from half the output rate,
# passband edge at 0.45x the output rate.
_AA_STOPBAND_DB = 60.0
_AA_CUTOFF_FRAC = 0.45


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs of the feature pipeline (flat key/value config on disk)."""

    target_rate_hz: int = 20000
    n_fft: int = 128
    hop: int = 64
    window: str = "hann"
    trim_start_ms: float = 125.0
    trim_end_ms: float = 325.0
    noise_ms: float = 100.0

    def __post_init__(self):
        if self.target_rate_hz <= 0:
            raise ValueError("target_rate_hz must be positive")
        if self.n_fft < 2 or self.n_fft % 2:
            raise ValueError("n_fft must be even and >= 2")
        if self.hop < 1:
            raise ValueError("hop must be >= 1")
        if self.window not in ("hann", "rectangular"):
            raise ValueError(f"unknown window {self.window!r}")
        if not (0 <= self.trim_start_ms < self.trim_end_ms):
            raise ValueError("need 0 <= trim_start_ms < trim_end_ms")
        if self.noise_ms <= 0:
            raise ValueError("noise_ms must be positive")

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1

    def to_file(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for key in ("target_rate_hz", "n_fft", "hop", "window",
                        "trim_start_ms", "trim_end_ms", "noise_ms"):
                fh.write(f"{key} = {getattr(self, key)}\n")

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        values = {}
        with open(path, encoding="utf-8") as fh:
            for no, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{no}: expected 'key = value', got {raw!r}")
                key, value = (part.strip() for part in line.split("=", 1))
                values[key] = value
        kwargs = {}
        for key, value in values.items():
            if key in ("target_rate_hz", "n_fft", "hop"):
                kwargs[key] = int(value)
            elif key in ("trim_start_ms", "trim_end_ms", "noise_ms"):
                kwargs[key] = float(value)
            elif key == "window":
                kwargs[key] = value
            else:
                raise ValueError(f"{path}: unknown pipeline key {key!r}")
        return cls(**kwargs)


@dataclass
class SpectrogramTensor:
    """C x T x F nonnegative magnitude tensor plus axis scaling."""

    data: np.ndarray
    frame_rate: float
    bin_width: float

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"expected (C, T, F) tensor, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("spectrogram contains non-finite values")
        if arr.size and arr.min() < 0:
            raise ValueError("spectrogram magnitudes must be nonnegative")
        self.data = arr

    @property
    def shape(self):
        return self.data.shape


@dataclass
class NoiseProfile:
    """Per-channel, per-bin mean magnitude of the steady-state background."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"expected (C, F) profile, got shape {arr.shape}")
        if arr.size and arr.min() < 0:
            raise ValueError("noise profile must be nonnegative")
        self.data = arr


@lru_cache(maxsize=32)
def design_antialias_filter(from_rate: int, to_rate: int) -> np.ndarray:
    """Kaiser windowed-sinc lowpass for polyphase resampling.

    Designed at the intermediate rate ``from_rate * up``: cutoff at
    0.45 * to_rate, transition to 0.5 * to_rate, >= 60 dB stopband. Odd
    length, so the group delay is an integer number of taps and the
    polyphase implementation can time-align the output exactly.
    """
    g = math.gcd(from_rate, to_rate)
    up, down = to_rate // g, from_rate // g
    internal_rate = from_rate * up
    cutoff_hz = _AA_CUTOFF_FRAC * to_rate
    transition_hz = 0.5 * to_rate - cutoff_hz
    beta = sps.kaiser_beta(_AA_STOPBAND_DB)
    delta_omega = 2.0 * np.pi * transition_hz / internal_rate
    numtaps = int(np.ceil((_AA_STOPBAND_DB - 7.95) / (2.285 * delta_omega)))
    numtaps += 1 - numtaps % 2
    return sps.firwin(numtaps, cutoff_hz, window=("kaiser", beta), fs=internal_rate)


def resample(x: np.ndarray, from_rate: int, to_rate: int) -> np.ndarray:
    """Rational polyphase downsampling with a Kaiser windowed-sinc FIR.

    Output length is ``ceil(L * to_rate / from_rate)`` and the output is
    group-delay compensated (time-aligned with the input). Works on 1-D
    signals or (C, L) channel stacks (filtered along the last axis).
    Upsampling is not supported.
    """
    if from_rate <= 0 or to_rate <= 0:
        raise ValueError("rates must be positive")
    if to_rate > from_rate:
        raise ValueError(f"upsampling {from_rate} -> {to_rate} Hz is not supported")
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("input signal contains non-finite samples")
    if from_rate == to_rate:
        return x.copy()
    g = math.gcd(int(from_rate), int(to_rate))
    up, down = int(to_rate) // g, int(from_rate) // g
    taps = design_antialias_filter(int(from_rate), int(to_rate))
    return sps.resample_poly(x, up, down, axis=-1, window=taps)


def trim_window(rec: Recording, start_ms: float = 125.0, end_ms: float = 325.0) -> Recording:
    """Slice all channels to the [start_ms, end_ms) analysis window.

    The trigger offset is shifted by -start_ms so contact times stay
    meaningful in the trimmed recording.
    """
    if not (0 <= start_ms < end_ms):
        raise ValueError("need 0 <= start_ms < end_ms")
    i0 = round(start_ms * rec.sample_rate / 1000.0)
    i1 = round(end_ms * rec.sample_rate / 1000.0)
    if i1 > rec.n_samples:
        raise ValueError(
            f"window [{start_ms}, {end_ms}] ms exceeds recording of {rec.duration_ms:.1f} ms"
        )
    return rec.with_channels(
        rec.channels[:, i0:i1].copy(),
        trigger_offset_ms=rec.trigger_offset_ms - start_ms,
    )


def stft_frame_count(n_samples: int, n_fft: int, hop: int) -> int:
    return 1 + (n_samples - n_fft) // hop


def _window_values(kind: str, n_fft: int) -> np.ndarray:
    if kind == "hann":
        # Periodic Hann, the usual STFT analysis window.
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n_fft) / n_fft)
    if kind == "rectangular":
        return np.ones(n_fft)
    raise ValueError(f"unknown window {kind!r}")


def stft(x: np.ndarray, n_fft: int = 128, hop: int = 64, window: str = "hann") -> np.ndarray:
    """Short-time Fourier transform without padding.

    Frame t covers samples ``[t*hop, t*hop + n_fft)``; only bins
    ``0..n_fft/2`` are kept. Returns a complex (T, F) array with
    ``T = 1 + floor((L - n_fft) / hop)``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("stft expects a 1-D signal")
    if n_fft < 2 or n_fft % 2:
        raise ValueError("n_fft must be even and >= 2")
    if hop < 1:
        raise ValueError("hop must be >= 1")
    if x.size < n_fft:
        raise ValueError(f"signal of {x.size} samples is shorter than n_fft={n_fft}")
    win = _window_values(window, n_fft)
    frames = np.lib.stride_tricks.sliding_window_view(x, n_fft)[::hop]
    return np.fft.rfft(frames * win, axis=1)


def magnitude_db_normalized(spectrum: np.ndarray) -> np.ndarray:
    """Magnitudes in dB relative to the maximum (peak sits at 0 dB)."""
    spec = np.asarray(spectrum, dtype=np.float64)
    if spec.size == 0 or spec.min() < 0:
        raise ValueError("expected a nonempty array of nonnegative magnitudes")
    peak = spec.max()
    if peak <= 0:
        raise ValueError("all-zero spectrum cannot be normalized")
    return 20.0 * np.log10(np.maximum(spec, DB_EPS) / peak)


def estimate_noise(
    rec: Recording,
    noise_ms: float = 100.0,
    n_fft: int = 128,
    hop: int = 64,
    window: str = "hann",
) -> NoiseProfile:
    """Mean STFT magnitude of the leading pre-trigger segment, per channel.

    Uses the first ``noise_ms`` of the recording; the STFT parameters must
    match the ones used for the analysis spectrogram so bins line up.
    """
    n = round(noise_ms * rec.sample_rate / 1000.0)
    if n > rec.n_samples or n < n_fft:
        raise ValueError(
            f"need at least {n_fft} pre-trigger samples for noise estimation, "
            f"have {min(n, rec.n_samples)}"
        )
    prof = np.stack([
        np.abs(stft(ch[:n], n_fft=n_fft, hop=hop, window=window)).mean(axis=0)
        for ch in rec.channels
    ])
    return NoiseProfile(prof)


def subtract_noise(spec: SpectrogramTensor, prof: NoiseProfile) -> SpectrogramTensor:
    """Magnitude-domain spectral subtraction, floored at zero."""
    c, _, f = spec.data.shape
    if prof.data.shape != (c, f):
        raise ValueError(
            f"profile shape {prof.data.shape} does not match spectrogram ({c}, T, {f})"
        )
    cleaned = np.maximum(spec.data - prof.data[:, None, :], 0.0)
    return replace(spec, data=cleaned)


def _crop_trajectory(traj: np.ndarray, t0: float, t1: float) -> np.ndarray:
    """Restrict a timed trajectory to [t0, t1], re-basing time at t0."""
    inner = traj[(traj[:, 0] > t0) & (traj[:, 0] < t1)]
    ends = trajectory_position(traj, np.array([t0, t1]))
    pts = np.vstack([
        np.concatenate(([t0], ends[0])),
        inner,
        np.concatenate(([t1], ends[1])),
    ])
    pts[:, 0] -= t0
    return pts


def chunk_stroke(rec: Recording, chunk_ms: float = 200.0):
    """Cut a stroke recording into consecutive fixed-length chunks.

    Each chunk keeps the cropped trajectory as its label and is paired with
    the time-average hand position over its interval, which is the
    regression target. The trailing partial chunk is dropped; a recording
    shorter than one chunk yields an empty list.
    """
    if rec.label.kind != "stroke" or rec.label.trajectory_mm is None:
        raise ValueError("chunk_stroke needs a recording with a stroke label")
    if chunk_ms <= 0:
        raise ValueError("chunk_ms must be positive")
    n = round(chunk_ms * rec.sample_rate / 1000.0)
    chunks = []
    for i in range(rec.n_samples // n):
        t0 = i * n * 1000.0 / rec.sample_rate
        t1 = (i + 1) * n * 1000.0 / rec.sample_rate
        target = trajectory_mean_position(rec.label.trajectory_mm, t0, t1)
        label = replace(rec.label, trajectory_mm=_crop_trajectory(rec.label.trajectory_mm, t0, t1))
        seg = rec.with_channels(
            rec.channels[:, i * n:(i + 1) * n].copy(),
            trigger_offset_ms=rec.trigger_offset_ms - t0,
            label=label,
        )
        chunks.append((seg, target))
    return chunks


def build_features(
    rec: Recording,
    config: PipelineConfig = PipelineConfig(),
    noise_profile: Optional[NoiseProfile] = None,
) -> SpectrogramTensor:
    """Full feature pipeline for one recording.

    Resamples to the target rate, estimates the background from the leading
    ``noise_ms`` (unless a profile is supplied, as for stroke chunks whose
    background comes from the parent recording), trims to the analysis
    window when the recording is longer than it, then stacks per-channel
    STFT magnitudes and subtracts the noise profile.
    """
    channels = resample(rec.channels, rec.sample_rate, config.target_rate_hz)
    rate = config.target_rate_hz
    if noise_profile is None:
        n_noise = round(config.noise_ms * rate / 1000.0)
        n_noise = min(n_noise, channels.shape[1])
        if n_noise < config.n_fft:
            raise ValueError("recording too short for noise estimation")
        noise_profile = NoiseProfile(np.stack([
            np.abs(stft(ch[:n_noise], config.n_fft, config.hop, config.window)).mean(axis=0)
            for ch in channels
        ]))
    i0 = round(config.trim_start_ms * rate / 1000.0)
    i1 = round(config.trim_end_ms * rate / 1000.0)
    if channels.shape[1] > i1 - i0:
        if i1 > channels.shape[1]:
            raise ValueError(
                f"analysis window [{config.trim_start_ms}, {config.trim_end_ms}] ms "
                f"exceeds the resampled recording"
            )
        channels = channels[:, i0:i1]
    mags = np.stack([
        np.abs(stft(ch, config.n_fft, config.hop, config.window)) for ch in channels
    ])
    spec = SpectrogramTensor(mags, frame_rate=rate / config.hop, bin_width=rate / config.n_fft)
    return subtract_noise(spec, noise_profile)


def standardize(features) -> np.ndarray:
    """Whole-tensor standardization applied right before the model.

    Subtracts the mean and divides by (std + 1e-6) over all entries of one
    sample's tensor. Accepts a SpectrogramTensor or a bare array.
    """
    arr = features.data if isinstance(features, SpectrogramTensor) else np.asarray(features)
    arr = arr.astype(np.float64)
    return (arr - arr.mean()) / (arr.std() + 1e-6)
