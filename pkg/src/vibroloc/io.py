"""Dataset persistence: float32 WAV files plus a JSONL manifest.

One manifest line per recording with fields ``id, path, sample_rate,
trigger_offset_ms, kind, material, view, region, scenario`` and either
``position_mm`` (impulse) or ``trajectory_mm`` (stroke).  WAV paths are
stored relative to the manifest so a dataset directory can be moved as a
unit.  Structural problems raise :class:`ManifestError` carrying the
offending line number.
"""

from __future__ import annotations

import json
import logging
import os
from typing import Iterable, Iterator, List, Sequence, Tuple

import numpy as np
from scipy.io import wavfile

from .errors import ManifestError
from .recording import (
    ContactLabel,
    Recording,
    warn_if_stroke_duration_out_of_range,
)

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.jsonl"
_COMMON_FIELDS = ("id", "path", "sample_rate", "trigger_offset_ms", "kind",
                  "material", "view", "region", "scenario")


def write_wav(path, channels: np.ndarray, sample_rate: int) -> None:
    """Write a (C, L) signal as a 32-bit float RIFF WAV."""
    data = np.ascontiguousarray(np.asarray(channels, dtype=np.float32).T)
    wavfile.write(path, int(sample_rate), data)


def read_wav(path) -> Tuple[np.ndarray, int]:
    """Read a WAV back as ((C, L) float64, sample_rate)."""
    rate, data = wavfile.read(path)
    if data.ndim == 1:
        data = data[:, None]
    if not np.issubdtype(data.dtype, np.floating):
        raise ValueError(f"{path}: expected float WAV samples, got {data.dtype}")
    return data.T.astype(np.float64), int(rate)


def manifest_entry(rec: Recording, rec_id: str, rel_path: str) -> dict:
    entry = {
        "id": rec_id,
        "path": rel_path,
        "sample_rate": rec.sample_rate,
        "trigger_offset_ms": rec.trigger_offset_ms,
        "kind": rec.label.kind,
        "material": rec.label.material,
        "view": rec.label.view,
        "region": rec.label.region,
        "scenario": rec.label.scenario,
    }
    if rec.label.kind == "impulse":
        entry["position_mm"] = [float(v) for v in rec.label.position_mm]
    else:
        entry["trajectory_mm"] = [[float(v) for v in row]
                                  for row in rec.label.trajectory_mm]
    return entry


def _parse_entry(obj: dict, line_no: int) -> dict:
    if not isinstance(obj, dict):
        raise ManifestError("manifest line is not an object", line_no)
    for field in _COMMON_FIELDS:
        if field not in obj:
            raise ManifestError(f"missing field {field!r}", line_no)
    kind = obj["kind"]
    if kind == "impulse":
        if "position_mm" not in obj:
            raise ManifestError("impulse entry needs position_mm", line_no)
        if "trajectory_mm" in obj:
            raise ManifestError("impulse entry must not carry trajectory_mm", line_no)
    elif kind == "stroke":
        if "trajectory_mm" not in obj:
            raise ManifestError("stroke entry needs trajectory_mm", line_no)
        if "position_mm" in obj:
            raise ManifestError("stroke entry must not carry position_mm", line_no)
    else:
        raise ManifestError(f"unknown kind {kind!r}", line_no)
    return obj


def read_manifest(path) -> List[dict]:
    """Parse and structurally validate a JSONL manifest."""
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"invalid JSON ({exc.msg})", line_no) from exc
            entries.append(_parse_entry(obj, line_no))
    return entries


def write_manifest(entries: Iterable[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry) + "\n")


def entry_to_label(entry: dict) -> ContactLabel:
    position = entry.get("position_mm")
    trajectory = entry.get("trajectory_mm")
    return ContactLabel(
        kind=entry["kind"],
        material=entry["material"],
        view=entry["view"],
        region=entry["region"],
        scenario=entry["scenario"],
        position_mm=None if position is None else np.asarray(position, dtype=np.float64),
        trajectory_mm=None if trajectory is None else np.asarray(trajectory, dtype=np.float64),
    )


def load_recording(entry: dict, base_dir) -> Recording:
    """Materialize one manifest entry; the WAV path is relative to base_dir."""
    wav_path = os.path.join(base_dir, entry["path"])
    channels, rate = read_wav(wav_path)
    if rate != int(entry["sample_rate"]):
        raise ManifestError(
            f"entry {entry['id']!r}: manifest says {entry['sample_rate']} Hz "
            f"but {entry['path']} holds {rate} Hz")
    label = entry_to_label(entry)
    warn_if_stroke_duration_out_of_range(label, context=f"(entry {entry['id']!r})")
    return Recording(channels=channels, sample_rate=rate,
                     trigger_offset_ms=float(entry["trigger_offset_ms"]), label=label)


def write_dataset(recordings: Sequence[Recording], out_dir, prefix: str = "rec") -> str:
    """Write recordings as WAVs plus a manifest; returns the manifest path."""
    wav_dir = os.path.join(out_dir, "wav")
    os.makedirs(wav_dir, exist_ok=True)
    entries = []
    for i, rec in enumerate(recordings):
        rec_id = f"{prefix}_{i:05d}"
        rel_path = os.path.join("wav", rec_id + ".wav")
        write_wav(os.path.join(out_dir, rel_path), rec.channels, rec.sample_rate)
        entries.append(manifest_entry(rec, rec_id, rel_path))
    manifest_path = os.path.join(out_dir, MANIFEST_NAME)
    write_manifest(entries, manifest_path)
    logger.info("wrote %d recordings to %s", len(entries), out_dir)
    return manifest_path


def iter_dataset(manifest_path) -> Iterator[Tuple[dict, Recording]]:
    """Yield (entry, Recording) pairs without holding the dataset in memory."""
    base_dir = os.path.dirname(os.path.abspath(manifest_path))
    for entry in read_manifest(manifest_path):
        yield entry, load_recording(entry, base_dir)


def load_dataset(manifest_path) -> List[Recording]:
    return [rec for _, rec in iter_dataset(manifest_path)]
