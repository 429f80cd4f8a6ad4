"""Core data containers: labeled multichannel recordings and contact labels.

A recording is a synchronized block of 7 contact-microphone channels with a
sample rate, a trigger offset (time of first contact relative to recording
start) and a label describing the interaction that produced it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

logger = logging.getLogger(__name__)

NUM_CHANNELS = 7
SUPPORTED_RATES = (50000, 20000)

MATERIALS = ("metal", "soft_plastic", "hard_plastic", "wood")
VIEWS = ("Back", "Front", "Right", "Left")
REGIONS = ("hand", "forearm")
SCENARIOS = ("fixed", "moving")

STROKE_MIN_MS = 1000.0
STROKE_MAX_MS = 10000.0


@dataclass
class ContactLabel:
    """Ground truth for one interaction.

    ``kind == "impulse"`` carries a single contact point; ``kind == "stroke"``
    carries a timed trajectory ``(t_ms, x, y, z)`` with strictly increasing
    timestamps, in recording time (t measured from the start of the recording).
    Coordinates are millimetres.
    """

    kind: str
    material: str
    view: str
    region: str
    scenario: str = "fixed"
    position_mm: Optional[np.ndarray] = None
    trajectory_mm: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("impulse", "stroke"):
            raise ValueError(f"unknown label kind {self.kind!r}")
        if self.material not in MATERIALS:
            raise ValueError(f"unknown material {self.material!r}")
        if self.view not in VIEWS:
            raise ValueError(f"unknown view {self.view!r}")
        if self.region not in REGIONS:
            raise ValueError(f"unknown region {self.region!r}")
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.kind == "impulse":
            if self.position_mm is None or self.trajectory_mm is not None:
                raise ValueError("impulse labels need exactly one position and no trajectory")
            self.position_mm = np.asarray(self.position_mm, dtype=np.float64).reshape(3)
        else:
            if self.trajectory_mm is None or self.position_mm is not None:
                raise ValueError("stroke labels need a trajectory and no single position")
            traj = np.asarray(self.trajectory_mm, dtype=np.float64)
            if traj.ndim != 2 or traj.shape[1] != 4 or traj.shape[0] < 2:
                raise ValueError("trajectory must be an (N>=2, 4) array of (t_ms, x, y, z)")
            if not np.all(np.diff(traj[:, 0]) > 0):
                raise ValueError("trajectory timestamps must be strictly increasing")
            if not np.all(np.isfinite(traj)):
                raise ValueError("trajectory contains non-finite values")
            self.trajectory_mm = traj

    @property
    def stroke_duration_ms(self) -> float:
        if self.trajectory_mm is None:
            raise ValueError("not a stroke label")
        return float(self.trajectory_mm[-1, 0] - self.trajectory_mm[0, 0])


@dataclass
class Recording:
    """7-channel time series plus metadata.

    ``channels`` is a (7, L) float array of dimensionless amplitudes; the
    nominal physical range of +/-0.5 V maps to +/-1.0 and ingestion clamps to
    that range. ``trigger_offset_ms`` is the contact time relative to the
    start of the recording (200 ms for the impulse task).
    """

    channels: np.ndarray
    sample_rate: int
    trigger_offset_ms: float
    label: ContactLabel

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=np.float64)
        if ch.ndim != 2 or ch.shape[0] != NUM_CHANNELS:
            raise ValueError(f"expected ({NUM_CHANNELS}, L) channel array, got shape {ch.shape}")
        if int(self.sample_rate) not in SUPPORTED_RATES:
            raise ValueError(f"sample_rate must be one of {SUPPORTED_RATES}, got {self.sample_rate}")
        if not np.all(np.isfinite(ch)):
            raise ValueError("recording contains non-finite samples")
        if np.abs(ch).max(initial=0.0) > 1.0:
            raise ValueError("samples exceed the +/-1.0 range (clamp on ingestion)")
        self.channels = ch
        self.sample_rate = int(self.sample_rate)
        self.trigger_offset_ms = float(self.trigger_offset_ms)

    @property
    def n_samples(self) -> int:
        return self.channels.shape[1]

    @property
    def duration_ms(self) -> float:
        return self.n_samples * 1000.0 / self.sample_rate

    def with_channels(self, channels: np.ndarray, **changes) -> "Recording":
        return replace(self, channels=channels, **changes)


def trajectory_position(trajectory: np.ndarray, t_ms) -> np.ndarray:
    """Piecewise-linear position at time(s) ``t_ms``, clamped at the ends.

    Before the first sample the hand sits at the first point; after the last
    sample it stays at the last point.
    """
    traj = np.asarray(trajectory, dtype=np.float64)
    t = np.asarray(t_ms, dtype=np.float64)
    out = np.empty(t.shape + (3,))
    for k in range(3):
        out[..., k] = np.interp(t, traj[:, 0], traj[:, k + 1])
    return out


def trajectory_mean_position(trajectory: np.ndarray, t0_ms: float, t1_ms: float) -> np.ndarray:
    """Exact time-average of the piecewise-linear trajectory over [t0, t1].

    Integrates each linear segment in closed form (trapezoid over the segment
    intersection), including the clamped constant extensions outside the
    trajectory's time span.
    """
    if not t1_ms > t0_ms:
        raise ValueError("need t1 > t0")
    traj = np.asarray(trajectory, dtype=np.float64)
    # Breakpoints of the piecewise-linear map restricted to [t0, t1].
    knots = np.concatenate(([t0_ms], traj[:, 0], [t1_ms]))
    knots = np.unique(np.clip(knots, t0_ms, t1_ms))
    acc = np.zeros(3)
    for a, b in zip(knots[:-1], knots[1:]):
        pa = trajectory_position(traj, a)
        pb = trajectory_position(traj, b)
        acc += 0.5 * (pa + pb) * (b - a)
    return acc / (t1_ms - t0_ms)


def warn_if_stroke_duration_out_of_range(label: ContactLabel, context: str = "") -> None:
    """Ingestion-side soft check of the 1-10 s stroke duration convention."""
    if label.kind != "stroke":
        return
    dur = label.stroke_duration_ms
    if not (STROKE_MIN_MS <= dur <= STROKE_MAX_MS):
        logger.warning(
            "stroke duration %.1f ms outside [%g, %g] ms %s",
            dur, STROKE_MIN_MS, STROKE_MAX_MS, context,
        )
