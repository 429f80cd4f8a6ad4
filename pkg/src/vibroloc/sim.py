"""Synthetic vibration rig.

Generates 7-channel contact recordings against a :class:`~vibroloc.scene.SceneModel`.
Impulses excite a damped modal ring per material; strokes excite lowpassed
friction noise whose bandwidth tracks surface roughness and whose amplitude
tracks roughness and sliding speed.  Every channel sees the source through a
geometric spreading law ``1 / (d + d0)`` and a propagation delay ``d / c``,
so the surviving localization cue after magnitude processing is the
amplitude ratio across the microphone array.

Background noise is always present: a 120 Hz fan harmonic stack with a
low-frequency rumble, plus wideband sensor noise.  The ``moving`` scenario
additionally injects motor chirp bursts at random times, which overlap the
contact window often enough to degrade localization relative to ``fixed``.

Randomness is derived from ``default_rng([seed, index])`` streams so that
dataset generation is reproducible and order-independent.
"""

from __future__ import annotations

import logging
from typing import Iterator, List, Optional, Sequence

import numpy as np
import scipy.signal as sps

from .recording import (
    STROKE_MAX_MS,
    STROKE_MIN_MS,
    ContactLabel,
    Recording,
    trajectory_mean_position,
    trajectory_position,
)
from .scene import MaterialProfile, SceneModel, VIEW_FACES

logger = logging.getLogger(__name__)

RAW_SAMPLE_RATE = 50000
STROKE_SAMPLE_RATE = 20000
IMPULSE_DURATION_MS = 500.0
IMPULSE_TRIGGER_MS = 200.0
STROKE_LEAD_IN_MS = 100.0
# Sensor/ADC noise floor, about -78 dBFS: a quality contact-mic ADC chain.
# The fan harmonics stay an order of magnitude above it, so background
# subtraction remains the load-bearing cleanup stage.  Kept low enough that
# a typical impulse carries over 99% of its spectral energy below 20 kHz
# (the flat noise tail above 20 kHz is the only broadband contributor).
DEFAULT_NOISE_LEVEL = 1.25e-4

# Friction excitation model: bandwidth knee and amplitude versus roughness
# and sliding speed.  Power grows like speed**1.5, i.e. amplitude**2.
FRICTION_KNEE_BASE_HZ = 500.0
FRICTION_KNEE_PER_ROUGHNESS_HZ = 5000.0
FRICTION_AMP_BASE = 0.2
FRICTION_REF_SPEED_MM_S = 40.0
FRICTION_SPEED_EXPONENT = 0.75

# Generated strokes stay near the short end of the supported 1-10 s range to
# keep dataset synthesis cheap; real recordings may run longer.
GEN_STROKE_MIN_MS = STROKE_MIN_MS
GEN_STROKE_MAX_MS = 3000.0


def _lowpassed_noise(rng: np.random.Generator, n: int, fs: float, cutoff_hz: float,
                     order: int = 4) -> np.ndarray:
    """Unit-variance white noise through a causal Butterworth lowpass."""
    white = rng.standard_normal(n)
    cutoff = min(cutoff_hz, 0.49 * fs)
    b, a = sps.butter(order, cutoff, fs=fs)
    return sps.lfilter(b, a, white)


def _mic_distances(scene: SceneModel, points_mm: np.ndarray) -> np.ndarray:
    """Distances (n_mics, ...) from every microphone to one or many points."""
    pts = np.atleast_2d(np.asarray(points_mm, dtype=np.float64))
    diff = scene.mic_positions_mm[:, None, :] - pts[None, :, :]
    d = np.sqrt(np.sum(diff * diff, axis=-1))
    return d[:, 0] if np.asarray(points_mm).ndim == 1 else d


def _fan_background(scene: SceneModel, rng: np.random.Generator, fs: float,
                    n: int) -> np.ndarray:
    """Fan harmonic stack plus low-frequency rumble, (7, n)."""
    spec = scene.fan_noise
    t = np.arange(n) / fs
    out = np.zeros((scene.mic_positions_mm.shape[0], n))
    # Structure-borne fan tone: coherent harmonics, mild per-channel gain spread.
    gains = rng.uniform(0.8, 1.2, size=out.shape[0])
    for h in range(1, spec.harmonics + 1):
        phase = rng.uniform(0.0, 2.0 * np.pi)
        tone = (spec.amplitude / h) * np.sin(2.0 * np.pi * h * spec.fundamental_hz * t + phase)
        out += gains[:, None] * tone[None, :]
    for ch in range(out.shape[0]):
        out[ch] += 0.5 * spec.amplitude * _lowpassed_noise(rng, n, fs, 150.0)
    return out


def _motor_bursts(scene: SceneModel, rng: np.random.Generator, fs: float,
                  n: int) -> np.ndarray:
    """Chirp bursts from the actuation motor, (7, n)."""
    spec = scene.motor_noise
    out = np.zeros((scene.mic_positions_mm.shape[0], n))
    duration_s = n / fs
    n_bursts = rng.poisson(spec.burst_rate_per_s * duration_s)
    lo, hi = spec.band_hz
    for _ in range(n_bursts):
        start = int(rng.uniform(0.0, n))
        length = int(rng.uniform(0.030, 0.080) * fs)
        length = min(length, n - start)
        if length < 16:
            continue
        f0, f1 = np.sort(rng.uniform(lo, hi, size=2))
        t = np.arange(length) / fs
        sweep_s = length / fs
        phase = 2.0 * np.pi * (f0 * t + 0.5 * (f1 - f0) / sweep_s * t * t)
        burst = np.sin(phase + rng.uniform(0.0, 2.0 * np.pi))
        burst *= np.hanning(length) * spec.amplitude * rng.uniform(0.5, 1.5)
        gains = rng.uniform(0.2, 1.0, size=out.shape[0])
        out[:, start:start + length] += gains[:, None] * burst[None, :]
    return out


def _background(scene: SceneModel, rng: np.random.Generator, fs: float, n: int,
                scenario: str, noise_level: float = DEFAULT_NOISE_LEVEL) -> np.ndarray:
    out = _fan_background(scene, rng, fs, n)
    if scenario == "moving":
        out += _motor_bursts(scene, rng, fs, n)
    out += noise_level * rng.standard_normal(out.shape)
    return out


def synthesize_impulse_channels(scene: SceneModel, profile: MaterialProfile,
                                position_mm: np.ndarray, rng: np.random.Generator,
                                fs: float, n: int, trigger_s: float,
                                strength: float = 1.0) -> np.ndarray:
    """Damped modal ring radiated from one contact point, (7, n).

    Mode frequencies are jittered once per event (surface heterogeneity), and
    each microphone sees the ring delayed by its travel time and attenuated
    by ``1 / (d + d0)``.
    """
    d = _mic_distances(scene, position_mm)
    tau = trigger_s + d / scene.wave_speed_mm_s
    t = np.arange(n) / fs
    out = np.zeros((d.shape[0], n))
    amp = strength * profile.impact_gain / (d + scene.attenuation_offset_mm)
    for f_hz, lam in zip(profile.mode_freqs_hz, profile.damping_per_s):
        f_jit = f_hz * (1.0 + profile.heterogeneity_jitter * rng.standard_normal())
        f_jit = min(f_jit, 9800.0)  # keep below the decimated Nyquist band edge
        phase = rng.uniform(0.0, 2.0 * np.pi)
        dt = t[None, :] - tau[:, None]
        ring = np.exp(-lam * np.maximum(dt, 0.0)) * np.sin(2.0 * np.pi * f_jit * dt + phase)
        out += amp[:, None] * ring * (dt >= 0.0)
    return out


def friction_knee_hz(roughness: float) -> float:
    return FRICTION_KNEE_BASE_HZ + roughness * FRICTION_KNEE_PER_ROUGHNESS_HZ


def friction_amplitude(profile: MaterialProfile, speed_mm_s) -> np.ndarray:
    """Friction excitation amplitude for a (possibly per-sample) speed."""
    speed = np.maximum(np.asarray(speed_mm_s, dtype=np.float64), 0.0)
    return (profile.impact_gain * (FRICTION_AMP_BASE + profile.roughness)
            * (speed / FRICTION_REF_SPEED_MM_S) ** FRICTION_SPEED_EXPONENT)


def synthesize_stroke_channels(scene: SceneModel, profile: MaterialProfile,
                               trajectory_mm: np.ndarray, rng: np.random.Generator,
                               fs: float, n: int) -> np.ndarray:
    """Friction noise dragged along a trajectory, (7, n).

    The excitation is lowpassed white noise whose knee frequency grows with
    roughness; its amplitude follows the instantaneous sliding speed.  Each
    channel applies a per-sample spreading gain and an integer-sample travel
    delay for the moving source.
    """
    traj = np.asarray(trajectory_mm, dtype=np.float64)
    t_ms = 1000.0 * np.arange(n) / fs
    pos = trajectory_position(traj, t_ms)  # (n, 3), clamped outside the stroke

    # Per-sample speed: piecewise-constant between knots, zero outside.
    knots_t = traj[:, 0]
    seg_dt = np.diff(knots_t)
    seg_len = np.linalg.norm(np.diff(traj[:, 1:], axis=0), axis=1)
    seg_speed = 1000.0 * seg_len / seg_dt  # mm/s
    seg_idx = np.clip(np.searchsorted(knots_t, t_ms, side="right") - 1, 0, len(seg_speed) - 1)
    speed = seg_speed[seg_idx]
    speed[(t_ms < knots_t[0]) | (t_ms >= knots_t[-1])] = 0.0

    excitation = _lowpassed_noise(rng, n, fs, friction_knee_hz(profile.roughness))
    # Slow multiplicative texture from surface heterogeneity.
    texture = 1.0 + profile.heterogeneity_jitter * _lowpassed_noise(rng, n, fs, 30.0) * 8.0
    source = friction_amplitude(profile, speed) * excitation * texture

    d = _mic_distances(scene, pos)  # (7, n)
    gains = 1.0 / (d + scene.attenuation_offset_mm)
    delays = np.rint(fs * d / scene.wave_speed_mm_s).astype(np.intp)
    out = np.zeros((d.shape[0], n))
    base = np.arange(n)
    for ch in range(out.shape[0]):
        idx = base + delays[ch]
        ok = idx < n
        np.add.at(out[ch], idx[ok], gains[ch, ok] * source[ok])
    return out


def simulate_impulse(scene: SceneModel, material: str, position_mm: np.ndarray,
                     scenario: str = "fixed", rng=None,
                     sample_rate: int = RAW_SAMPLE_RATE, strength: float = 1.0,
                     noise_level: float = DEFAULT_NOISE_LEVEL) -> Recording:
    """One tap recording: 500 ms at 50 kHz, contact 200 ms in.

    ``rng`` may be a seed or a Generator; identical inputs give bit-identical
    output.  ``noise_level`` is the standard deviation of the wideband
    sensor noise present throughout.
    """
    rng = np.random.default_rng(rng)
    profile = scene.materials[material]
    position = np.asarray(position_mm, dtype=np.float64).reshape(3)
    if not scene.workspace.contains(position):
        raise ValueError(f"contact position {position.tolist()} is outside the workspace")
    n = int(round(IMPULSE_DURATION_MS * sample_rate / 1000.0))
    channels = _background(scene, rng, sample_rate, n, scenario, noise_level)
    channels += synthesize_impulse_channels(scene, profile, position, rng, sample_rate,
                                            n, IMPULSE_TRIGGER_MS / 1000.0, strength)
    np.clip(channels, -1.0, 1.0, out=channels)
    label = ContactLabel(kind="impulse", material=material,
                         view=scene.nearest_view(position),
                         region=scene.region_of(position), scenario=scenario,
                         position_mm=position)
    return Recording(channels=channels, sample_rate=sample_rate,
                     trigger_offset_ms=IMPULSE_TRIGGER_MS, label=label)


def simulate_stroke(scene: SceneModel, material: str, trajectory_mm: np.ndarray,
                    scenario: str = "fixed", rng=None,
                    sample_rate: int = STROKE_SAMPLE_RATE,
                    noise_level: float = DEFAULT_NOISE_LEVEL) -> Recording:
    """One stroke recording (20 kHz) with a 100 ms background lead-in.

    ``trajectory_mm`` is (N, 4) rows ``(t_ms, x, y, z)`` with ``t_ms``
    starting at 0; the stored label shifts timestamps into recording time so
    the contact begins at ``trigger_offset_ms``.  The stroke must last
    between 1 and 10 seconds.
    """
    rng = np.random.default_rng(rng)
    profile = scene.materials[material]
    traj = np.asarray(trajectory_mm, dtype=np.float64)
    if traj.ndim != 2 or traj.shape[1] != 4 or traj.shape[0] < 2:
        raise ValueError("trajectory must be (N, 4) with N >= 2")
    duration = traj[-1, 0] - traj[0, 0]
    if not STROKE_MIN_MS <= duration <= STROKE_MAX_MS:
        raise ValueError(f"stroke duration {duration:.1f} ms outside "
                         f"[{STROKE_MIN_MS:g}, {STROKE_MAX_MS:g}] ms")
    if not scene.workspace.contains(traj[:, 1:]):
        raise ValueError("stroke trajectory leaves the workspace")
    shifted = traj.copy()
    shifted[:, 0] += STROKE_LEAD_IN_MS - traj[0, 0]
    n = int(round(shifted[-1, 0] * sample_rate / 1000.0))
    channels = _background(scene, rng, sample_rate, n, scenario, noise_level)
    channels += synthesize_stroke_channels(scene, profile, shifted, rng, sample_rate, n)
    np.clip(channels, -1.0, 1.0, out=channels)
    mean_pos = trajectory_mean_position(shifted, shifted[0, 0], shifted[-1, 0])
    label = ContactLabel(kind="stroke", material=material,
                         view=scene.nearest_view(shifted[0, 1:]),
                         region=scene.region_of(mean_pos), scenario=scenario,
                         trajectory_mm=shifted)
    return Recording(channels=channels, sample_rate=sample_rate,
                     trigger_offset_ms=STROKE_LEAD_IN_MS, label=label)


def sample_face_position(scene: SceneModel, view: str, rng: np.random.Generator,
                         margin: float = 0.05) -> np.ndarray:
    """Random contact point on a lateral face, kept off the exact edges."""
    u, v = rng.uniform(margin, 1.0 - margin, size=2)
    return scene.face_point(view, u, v)


def sample_face_trajectory(scene: SceneModel, view: str, rng: np.random.Generator) -> np.ndarray:
    """Random polyline stroke on a face, (N, 4) with t starting at 0.

    2 to 4 knots, duration tied to path length through a sampled sliding
    speed, then clamped into the supported stroke duration range.
    """
    n_knots = int(rng.integers(2, 5))
    uv = np.column_stack([rng.uniform(0.15, 0.85, size=n_knots),
                          rng.uniform(0.10, 0.90, size=n_knots)])
    pts = np.stack([scene.face_point(view, u, v) for u, v in uv])
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    # Merge accidental near-duplicate knots to keep timestamps increasing.
    keep = np.concatenate([[True], seg > 1.0])
    pts = pts[keep]
    if pts.shape[0] < 2:
        pts = np.stack([pts[0], scene.face_point(view, *rng.uniform(0.15, 0.85, size=2))])
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    total = float(np.sum(seg))
    speed = rng.uniform(25.0, 80.0)  # mm/s
    duration_ms = float(np.clip(1000.0 * total / speed, GEN_STROKE_MIN_MS, GEN_STROKE_MAX_MS))
    t = np.concatenate([[0.0], np.cumsum(seg)]) / total * duration_ms
    return np.column_stack([t, pts])


def impulse_event(scene: SceneModel, materials: Sequence[str],
                  count_per_material: int, scenario: str, seed: int, idx: int,
                  noise_level: float = DEFAULT_NOISE_LEVEL) -> Recording:
    """Event ``idx`` of a generated impulse dataset.

    Each event draws from its own ``default_rng([seed, idx])`` stream, so
    datasets are reproducible and the events can be built in any order (or
    in parallel) with identical results.
    """
    material = materials[idx // count_per_material]
    rng = np.random.default_rng([seed, idx])
    views = list(VIEW_FACES)
    view = views[rng.integers(len(views))]
    position = sample_face_position(scene, view, rng)
    strength = rng.uniform(0.7, 1.3)
    return simulate_impulse(scene, material, position, scenario, rng,
                            strength=strength, noise_level=noise_level)


def iter_impulse_dataset(scene: SceneModel, count_per_material: int,
                         scenario: str = "fixed", seed: int = 0,
                         noise_level: float = DEFAULT_NOISE_LEVEL,
                         materials: Optional[Sequence[str]] = None) -> Iterator[Recording]:
    """Taps sampled uniformly over the four lateral faces, per material.

    Yields one recording at a time; large datasets should be consumed
    streaming (a 50 kHz impulse is about 1.4 MB).
    """
    if count_per_material <= 0:
        raise ValueError("count_per_material must be positive")
    materials = list(scene.materials) if materials is None else list(materials)
    for idx in range(len(materials) * count_per_material):
        yield impulse_event(scene, materials, count_per_material, scenario,
                            seed, idx, noise_level)


def generate_impulse_dataset(scene: SceneModel, count_per_material: int,
                             scenario: str = "fixed", seed: int = 0,
                             noise_level: float = DEFAULT_NOISE_LEVEL,
                             materials: Optional[Sequence[str]] = None) -> List[Recording]:
    recordings = list(iter_impulse_dataset(scene, count_per_material, scenario,
                                           seed, noise_level, materials))
    logger.info("generated %d impulse recordings", len(recordings))
    return recordings


def stroke_event(scene: SceneModel, materials: Sequence[str],
                 count_per_material: int, scenario: str, seed: int, idx: int,
                 noise_level: float = DEFAULT_NOISE_LEVEL) -> Recording:
    """Event ``idx`` of a generated stroke dataset (stream-per-event as for
    impulses, offset so impulse and stroke streams never collide)."""
    material = materials[idx // count_per_material]
    rng = np.random.default_rng([seed, 1_000_000 + idx])
    views = list(VIEW_FACES)
    view = views[rng.integers(len(views))]
    traj = sample_face_trajectory(scene, view, rng)
    return simulate_stroke(scene, material, traj, scenario, rng,
                           noise_level=noise_level)


def iter_stroke_dataset(scene: SceneModel, count_per_material: int,
                        scenario: str = "fixed", seed: int = 0,
                        noise_level: float = DEFAULT_NOISE_LEVEL,
                        materials: Optional[Sequence[str]] = None) -> Iterator[Recording]:
    """Strokes on random lateral faces, per material; streams as above."""
    if count_per_material <= 0:
        raise ValueError("count_per_material must be positive")
    materials = list(scene.materials) if materials is None else list(materials)
    for idx in range(len(materials) * count_per_material):
        yield stroke_event(scene, materials, count_per_material, scenario,
                           seed, idx, noise_level)


def generate_stroke_dataset(scene: SceneModel, count_per_material: int,
                            scenario: str = "fixed", seed: int = 0,
                            noise_level: float = DEFAULT_NOISE_LEVEL,
                            materials: Optional[Sequence[str]] = None) -> List[Recording]:
    recordings = list(iter_stroke_dataset(scene, count_per_material, scenario,
                                          seed, noise_level, materials))
    logger.info("generated %d stroke recordings", len(recordings))
    return recordings


DEFAULT_PATCH_SIZE_MM = (80.0, 80.0)
DEFAULT_PEN_SPEED_MM_S = 40.0


def quickdraw_strokes_to_patch(drawing: Sequence, size_mm=DEFAULT_PATCH_SIZE_MM) -> List[np.ndarray]:
    """Scale simplified 0..255 drawing strokes into patch coordinates (mm).

    Input is the ``drawing`` field of the simplified ndjson format: a list of
    ``[xs, ys]`` pairs.  Output strokes are (N, 2) arrays centered on the
    patch with the y axis flipped (drawings use screen coordinates).
    """
    w, h = float(size_mm[0]), float(size_mm[1])
    scale = min(w, h) / 255.0
    out = []
    for xs, ys in drawing:
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        uv = np.column_stack([(xs - 127.5) * scale, (127.5 - ys) * scale])
        out.append(uv)
    return out


def time_stroke(uv: np.ndarray, speed_mm_s: float = DEFAULT_PEN_SPEED_MM_S) -> np.ndarray:
    """Assign constant-speed timestamps to a 2D stroke, giving (N, 3) rows
    ``(t_ms, u, v)``.

    The duration clips into the supported 1-10 s range; a zero-length stroke
    becomes a minimum-duration dwell.
    """
    uv = np.atleast_2d(np.asarray(uv, dtype=np.float64))
    if uv.shape[0] < 2:
        uv = np.repeat(uv, 2, axis=0)
    seg = np.linalg.norm(np.diff(uv, axis=0), axis=1)
    total = float(np.sum(seg))
    if total <= 1e-9:
        t = np.linspace(0.0, STROKE_MIN_MS, uv.shape[0])
    else:
        duration_ms = float(np.clip(1000.0 * total / speed_mm_s,
                                    STROKE_MIN_MS, STROKE_MAX_MS))
        t = np.concatenate([[0.0], np.cumsum(seg)]) / total * duration_ms
    return np.column_stack([t, uv])


def load_quickdraw_simplified(path, size_mm=DEFAULT_PATCH_SIZE_MM,
                              speed_mm_s: float = DEFAULT_PEN_SPEED_MM_S,
                              limit: Optional[int] = None) -> List[List[np.ndarray]]:
    """Load simplified drawings as lists of timed patch strokes.

    Each line of the ndjson file holds one drawing whose strokes are paired
    x/y arrays in a 0..255 box.  Strokes come back scaled onto the drawing
    patch and timed at constant pen speed (rows ``(t_ms, u, v)``).  Empty
    drawings are skipped with a warning; malformed lines raise with their
    line number.
    """
    import json

    drawings = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                raw = obj["drawing"]
                strokes = quickdraw_strokes_to_patch(raw, size_mm)
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"line {line_no}: malformed drawing record ({exc})") from exc
            if not strokes:
                logger.warning("line %d: empty drawing skipped", line_no)
                continue
            drawings.append([time_stroke(uv, speed_mm_s) for uv in strokes])
            if limit is not None and len(drawings) >= limit:
                break
    return drawings


def drawing_trajectories(scene: SceneModel, drawing: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Lift timed patch strokes ``(t_ms, u, v)`` into 3D ``(t_ms, x, y, z)``."""
    out = []
    for stroke in drawing:
        stroke = np.asarray(stroke, dtype=np.float64)
        pts = scene.drawing_patch.to_3d(stroke[:, 1:3])
        out.append(np.column_stack([stroke[:, 0], pts]))
    return out


def synth_drawing(rng_seed, stroke_count: int = 5, size_mm=DEFAULT_PATCH_SIZE_MM,
                  speed_mm_s: float = DEFAULT_PEN_SPEED_MM_S) -> List[np.ndarray]:
    """Random drawing of lines, arcs and zigzags inside the patch.

    Returns the same timed-stroke representation as the Quick Draw loader,
    so tests and the planner need no external drawing files.
    """
    if stroke_count < 1:
        raise ValueError("stroke_count must be at least 1")
    rng = np.random.default_rng(rng_seed)
    half_w, half_h = 0.5 * float(size_mm[0]), 0.5 * float(size_mm[1])
    strokes = []
    for _ in range(stroke_count):
        kind = rng.choice(["line", "arc", "zigzag"])
        if kind == "line":
            uv = rng.uniform([-half_w, -half_h], [half_w, half_h], size=(2, 2))
        elif kind == "arc":
            radius = rng.uniform(0.1, 0.35) * min(half_w, half_h) * 2.0
            center = rng.uniform([-half_w + radius, -half_h + radius],
                                 [half_w - radius, half_h - radius])
            theta0 = rng.uniform(0.0, 2.0 * np.pi)
            span = rng.uniform(np.pi / 3.0, 1.6 * np.pi)
            theta = theta0 + np.linspace(0.0, span, 12)
            uv = center + radius * np.column_stack([np.cos(theta), np.sin(theta)])
        else:
            k = int(rng.integers(4, 7))
            u = np.linspace(*sorted(rng.uniform(-half_w, half_w, size=2)), k)
            v0, amp = rng.uniform(-0.6 * half_h, 0.6 * half_h), rng.uniform(3.0, 0.4 * half_h)
            v = v0 + amp * np.where(np.arange(k) % 2 == 0, 1.0, -1.0)
            uv = np.column_stack([u, v])
        strokes.append(time_stroke(uv, speed_mm_s))
    return strokes
