"""Feature assembly: manifest entries and recordings to model-ready tensors.

An impulse recording becomes one sample; a stroke recording becomes one
sample per 200 ms chunk, every chunk sharing the noise profile estimated
from the parent recording's lead-in so the spectral subtraction does not
leak contact energy into the background estimate.  Features are cached as
float32 (they are standardized magnitudes, well within float32 range) and
cast to float64 at batch time by the training loop.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .dsp import (
    NoiseProfile,
    PipelineConfig,
    build_features,
    chunk_stroke,
    resample,
    standardize,
    stft,
)
from .recording import Recording

log = logging.getLogger(__name__)


@dataclass
class Sample:
    """One model input/target pair with its grouping metadata."""

    sample_id: str
    features: np.ndarray  # (C, T, F) float32, standardized
    target_mm: np.ndarray  # (3,)
    kind: str
    material: str
    view: str
    region: str
    scenario: str
    parent_id: str
    chunk_index: int = 0


def parent_noise_profile(rec: Recording, config: PipelineConfig) -> NoiseProfile:
    """Noise profile of a recording's lead-in at the pipeline's target rate."""
    channels = resample(rec.channels, rec.sample_rate, config.target_rate_hz)
    n = round(config.noise_ms * config.target_rate_hz / 1000.0)
    n = min(n, channels.shape[1])
    if n < config.n_fft:
        raise ValueError("recording too short for noise estimation")
    return NoiseProfile(np.stack([
        np.abs(stft(ch[:n], config.n_fft, config.hop, config.window)).mean(axis=0)
        for ch in channels
    ]))


def assemble_samples(entry: dict, rec: Recording,
                     config: PipelineConfig = PipelineConfig()) -> List[Sample]:
    """Turn one manifest entry plus its recording into model samples."""
    meta = dict(kind=entry["kind"], material=entry["material"], view=entry["view"],
                region=entry["region"], scenario=entry["scenario"],
                parent_id=entry["id"])
    if entry["kind"] == "impulse":
        feats = standardize(build_features(rec, config)).astype(np.float32)
        return [Sample(sample_id=entry["id"], features=feats,
                       target_mm=np.asarray(rec.label.position_mm, dtype=np.float64),
                       **meta)]
    profile = parent_noise_profile(rec, config)
    samples = []
    for k, (seg, target) in enumerate(chunk_stroke(rec)):
        feats = standardize(build_features(seg, config, noise_profile=profile))
        samples.append(Sample(sample_id=f"{entry['id']}#{k}",
                              features=feats.astype(np.float32),
                              target_mm=np.asarray(target, dtype=np.float64),
                              chunk_index=k, **meta))
    return samples


def assemble_dataset(pairs: Iterable[Tuple[dict, Recording]],
                     config: PipelineConfig = PipelineConfig()) -> List[Sample]:
    samples: List[Sample] = []
    for entry, rec in pairs:
        samples.extend(assemble_samples(entry, rec, config))
    return samples


def stack_samples(samples: Sequence[Sample]) -> Tuple[np.ndarray, np.ndarray]:
    """(N, C, T, F) float32 features and (N, 3) mm targets."""
    if not samples:
        raise ValueError("no samples to stack")
    feats = np.stack([s.features for s in samples])
    targets = np.stack([s.target_mm for s in samples])
    return feats, targets


_META_FIELDS = ("sample_id", "kind", "material", "view", "region", "scenario",
                "parent_id")


def save_sample_cache(samples: Sequence[Sample], path: Union[str, Path]) -> None:
    """Persist assembled features so repeated runs skip the STFT pipeline."""
    feats, targets = stack_samples(samples)
    meta = {f: np.array([getattr(s, f) for s in samples]) for f in _META_FIELDS}
    meta["chunk_index"] = np.array([s.chunk_index for s in samples])
    np.savez_compressed(path, features=feats.astype(np.float32),
                        targets_mm=targets, **meta)


def load_sample_cache(path: Union[str, Path]) -> List[Sample]:
    with np.load(path, allow_pickle=False) as data:
        feats = data["features"]
        targets = data["targets_mm"]
        meta = {f: data[f] for f in _META_FIELDS}
        chunk_index = data["chunk_index"]
        return [Sample(sample_id=str(meta["sample_id"][i]),
                       features=feats[i],
                       target_mm=targets[i],
                       kind=str(meta["kind"][i]),
                       material=str(meta["material"][i]),
                       view=str(meta["view"][i]),
                       region=str(meta["region"][i]),
                       scenario=str(meta["scenario"][i]),
                       parent_id=str(meta["parent_id"][i]),
                       chunk_index=int(chunk_index[i]))
                for i in range(len(feats))]
