"""Scene description for the synthetic vibration rig.

A scene bundles the 7 microphone positions, wave propagation constants, the
workspace box the surface interactions live on, noise source models, the
drawing patch for stroke tasks, and the per-material excitation profiles.
The default scene ships as ``data/default_scene.json``; views map to the
four lateral workspace faces (Back +y, Front -y, Right +x, Left -x) and
the hand/forearm regions split at ``hand_z_split_mm``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Dict

import numpy as np

from .recording import MATERIALS, VIEWS

# view -> (axis index, sign of the face along that axis)
VIEW_FACES = {"Back": (1, +1), "Front": (1, -1), "Right": (0, +1), "Left": (0, -1)}


@dataclass(frozen=True)
class Box:
    min_mm: np.ndarray
    max_mm: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "min_mm", np.asarray(self.min_mm, dtype=np.float64).reshape(3))
        object.__setattr__(self, "max_mm", np.asarray(self.max_mm, dtype=np.float64).reshape(3))
        if not np.all(self.max_mm > self.min_mm):
            raise ValueError("box must have positive extent on every axis")

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.min_mm + self.max_mm)

    @property
    def half_extent(self) -> np.ndarray:
        return 0.5 * (self.max_mm - self.min_mm)

    def contains(self, points: np.ndarray, tol: float = 1e-6) -> bool:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return bool(np.all(pts >= self.min_mm - tol) and np.all(pts <= self.max_mm + tol))


@dataclass(frozen=True)
class FanNoiseSpec:
    """Stationary self-noise of the powered hand: harmonic stack plus a
    low-frequency rumble component."""

    fundamental_hz: float = 120.0
    harmonics: int = 5
    amplitude: float = 0.002


@dataclass(frozen=True)
class MotorNoiseSpec:
    """Transient actuation noise: chirp bursts at random times."""

    burst_rate_per_s: float = 3.0
    band_hz: tuple = (300.0, 4000.0)
    amplitude: float = 0.02


@dataclass(frozen=True)
class MaterialProfile:
    """Excitation signature of one indenter material."""

    mode_freqs_hz: tuple
    damping_per_s: tuple
    impact_gain: float
    roughness: float
    heterogeneity_jitter: float

    def __post_init__(self):
        freqs = tuple(float(f) for f in self.mode_freqs_hz)
        damps = tuple(float(d) for d in self.damping_per_s)
        object.__setattr__(self, "mode_freqs_hz", freqs)
        object.__setattr__(self, "damping_per_s", damps)
        if len(freqs) != len(damps) or not freqs:
            raise ValueError("mode_freqs_hz and damping_per_s must be nonempty and equal length")
        if any(not 0 < f <= 10000 for f in freqs):
            raise ValueError("mode frequencies must lie in (0, 10000] Hz")
        if any(d <= 0 for d in damps):
            raise ValueError("damping rates must be positive")
        if not 0 <= self.roughness <= 1:
            raise ValueError("roughness must lie in [0, 1]")
        if self.heterogeneity_jitter < 0:
            raise ValueError("heterogeneity_jitter must be nonnegative")


DEFAULT_MATERIALS: Dict[str, MaterialProfile] = {
    "metal": MaterialProfile((6000.0, 9000.0), (200.0, 300.0), 1.0, 0.1, 0.01),
    "hard_plastic": MaterialProfile((3500.0,), (600.0,), 0.8, 0.3, 0.02),
    "soft_plastic": MaterialProfile((1500.0,), (1200.0,), 0.5, 0.4, 0.02),
    "wood": MaterialProfile((2500.0,), (800.0,), 0.7, 0.9, 0.08),
}


@dataclass(frozen=True)
class DrawingPatch:
    """Rectangular drawing area on one workspace face (u, v in mm)."""

    view: str = "Front"
    center_mm: np.ndarray = field(default_factory=lambda: np.array([0.0, -100.0, 70.0]))
    size_mm: tuple = (80.0, 80.0)

    def __post_init__(self):
        object.__setattr__(self, "center_mm",
                           np.asarray(self.center_mm, dtype=np.float64).reshape(3))
        if self.view not in VIEW_FACES:
            raise ValueError(f"unknown view {self.view!r}")

    @property
    def axes(self):
        """In-plane unit axes (u, v) of the patch for its face."""
        face_axis, _ = VIEW_FACES[self.view]
        u = np.zeros(3)
        u[0 if face_axis == 1 else 1] = 1.0  # in-plane horizontal axis
        v = np.array([0.0, 0.0, 1.0])
        return u, v

    def to_3d(self, uv: np.ndarray) -> np.ndarray:
        """Map patch coordinates (N, 2) to workspace points (N, 3)."""
        uv = np.atleast_2d(np.asarray(uv, dtype=np.float64))
        u_axis, v_axis = self.axes
        return self.center_mm + np.outer(uv[:, 0], u_axis) + np.outer(uv[:, 1], v_axis)


@dataclass(frozen=True)
class SceneModel:
    mic_positions_mm: np.ndarray
    wave_speed_mm_s: float = 1.0e6
    attenuation_offset_mm: float = 20.0
    workspace: Box = field(default_factory=lambda: Box([-100.0, -100.0, 0.0],
                                                       [100.0, 100.0, 300.0]))
    hand_z_split_mm: float = 150.0
    fan_noise: FanNoiseSpec = field(default_factory=FanNoiseSpec)
    motor_noise: MotorNoiseSpec = field(default_factory=MotorNoiseSpec)
    drawing_patch: DrawingPatch = field(default_factory=DrawingPatch)
    materials: Dict[str, MaterialProfile] = field(
        default_factory=lambda: dict(DEFAULT_MATERIALS))

    def __post_init__(self):
        mics = np.asarray(self.mic_positions_mm, dtype=np.float64)
        if mics.shape != (7, 3):
            raise ValueError(f"expected 7 microphone positions, got shape {mics.shape}")
        if len({tuple(row) for row in mics.tolist()}) != 7:
            raise ValueError("microphone positions must be distinct")
        if self.wave_speed_mm_s <= 0:
            raise ValueError("wave_speed_mm_s must be positive")
        if not self.workspace.contains(mics):
            raise ValueError("workspace must contain all microphones")
        object.__setattr__(self, "mic_positions_mm", mics)

    def region_of(self, point: np.ndarray) -> str:
        return "hand" if point[2] >= self.hand_z_split_mm else "forearm"

    def nearest_view(self, point: np.ndarray) -> str:
        """View whose face is closest to the point (exact for face points)."""
        best, best_d = None, np.inf
        for view in VIEWS:
            axis, sign = VIEW_FACES[view]
            bound = self.workspace.max_mm[axis] if sign > 0 else self.workspace.min_mm[axis]
            d = abs(point[axis] - bound)
            if d < best_d:
                best, best_d = view, d
        return best

    def face_point(self, view: str, u: float, v: float) -> np.ndarray:
        """Point on a lateral face; (u, v) in [0, 1] span the free axes."""
        axis, sign = VIEW_FACES[view]
        lo, hi = self.workspace.min_mm, self.workspace.max_mm
        p = np.empty(3)
        p[axis] = hi[axis] if sign > 0 else lo[axis]
        other = 1 - axis  # the remaining horizontal axis
        p[other] = lo[other] + u * (hi[other] - lo[other])
        p[2] = lo[2] + v * (hi[2] - lo[2])
        return p


def scene_to_dict(scene: SceneModel) -> dict:
    return {
        "mic_positions_mm": scene.mic_positions_mm.tolist(),
        "wave_speed_mm_s": scene.wave_speed_mm_s,
        "attenuation_offset_mm": scene.attenuation_offset_mm,
        "workspace_mm": {"min": scene.workspace.min_mm.tolist(),
                         "max": scene.workspace.max_mm.tolist()},
        "hand_z_split_mm": scene.hand_z_split_mm,
        "fan_noise": {"fundamental_hz": scene.fan_noise.fundamental_hz,
                      "harmonics": scene.fan_noise.harmonics,
                      "amplitude": scene.fan_noise.amplitude},
        "motor_noise": {"burst_rate_per_s": scene.motor_noise.burst_rate_per_s,
                        "band_hz": list(scene.motor_noise.band_hz),
                        "amplitude": scene.motor_noise.amplitude},
        "drawing_patch": {"view": scene.drawing_patch.view,
                          "center_mm": scene.drawing_patch.center_mm.tolist(),
                          "size_mm": list(scene.drawing_patch.size_mm)},
        "materials": {
            name: {"mode_freqs_hz": list(m.mode_freqs_hz),
                   "damping_per_s": list(m.damping_per_s),
                   "impact_gain": m.impact_gain,
                   "roughness": m.roughness,
                   "heterogeneity_jitter": m.heterogeneity_jitter}
            for name, m in scene.materials.items()
        },
    }


def scene_from_dict(data: dict) -> SceneModel:
    try:
        materials = {
            name: MaterialProfile(
                mode_freqs_hz=tuple(spec["mode_freqs_hz"]),
                damping_per_s=tuple(spec["damping_per_s"]),
                impact_gain=float(spec["impact_gain"]),
                roughness=float(spec["roughness"]),
                heterogeneity_jitter=float(spec["heterogeneity_jitter"]),
            )
            for name, spec in data["materials"].items()
        }
        unknown = set(materials) - set(MATERIALS)
        if unknown:
            raise ValueError(f"unknown material names in scene: {sorted(unknown)}")
        return SceneModel(
            mic_positions_mm=np.asarray(data["mic_positions_mm"], dtype=np.float64),
            wave_speed_mm_s=float(data["wave_speed_mm_s"]),
            attenuation_offset_mm=float(data["attenuation_offset_mm"]),
            workspace=Box(data["workspace_mm"]["min"], data["workspace_mm"]["max"]),
            hand_z_split_mm=float(data["hand_z_split_mm"]),
            fan_noise=FanNoiseSpec(
                fundamental_hz=float(data["fan_noise"]["fundamental_hz"]),
                harmonics=int(data["fan_noise"]["harmonics"]),
                amplitude=float(data["fan_noise"]["amplitude"]),
            ),
            motor_noise=MotorNoiseSpec(
                burst_rate_per_s=float(data["motor_noise"]["burst_rate_per_s"]),
                band_hz=tuple(float(f) for f in data["motor_noise"]["band_hz"]),
                amplitude=float(data["motor_noise"]["amplitude"]),
            ),
            drawing_patch=DrawingPatch(
                view=data["drawing_patch"]["view"],
                center_mm=np.asarray(data["drawing_patch"]["center_mm"], dtype=np.float64),
                size_mm=tuple(float(s) for s in data["drawing_patch"]["size_mm"]),
            ),
            materials=materials,
        )
    except KeyError as exc:
        raise ValueError(f"scene file is missing key {exc}") from exc


def load_scene(path) -> SceneModel:
    with open(path, encoding="utf-8") as fh:
        return scene_from_dict(json.load(fh))


def save_scene(scene: SceneModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scene_to_dict(scene), fh, indent=2)
        fh.write("\n")


def default_scene() -> SceneModel:
    """The shipped desk-scale scene (7 mics over a 200x200x300 mm box)."""
    ref = resources.files("vibroloc").joinpath("data/default_scene.json")
    return scene_from_dict(json.loads(ref.read_text(encoding="utf-8")))
