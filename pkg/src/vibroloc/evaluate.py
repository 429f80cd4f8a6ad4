"""Splits, error metrics, aggregation, and trajectory reconstruction.

``evaluate`` takes any predictor (a trained model or a stub) and a list of
assembled samples and produces per-sample error records; ``aggregate``
groups them by material, view, region, scenario, or seed.  Euclidean errors
are always in millimetres; squared errors are reported in the normalized
[-1, 1] coordinate space used for training, which is also how the stats CSV
labels them.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .datasets import Sample
from .model import ModelParams, TargetNorm, forward
from .recording import MATERIALS

# fractions of the Quick Draw category pool given to train/val/test
CATEGORY_COUNTS = (276, 35, 34)

Predictor = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SplitSpec:
    held_out_material: str
    scenario: str = "both"

    def __post_init__(self):
        if self.held_out_material not in MATERIALS:
            raise ValueError(f"held_out_material must be one of {MATERIALS}")
        if self.scenario not in ("fixed", "moving", "both"):
            raise ValueError("scenario must be fixed, moving, or both")

    def scenario_matches(self, scenario: str) -> bool:
        return self.scenario == "both" or scenario == self.scenario


@dataclass
class ErrorRecord:
    sample_id: str
    material: str
    view: str
    region: str
    scenario: str
    error_mm: float
    pred_mm: np.ndarray
    target_mm: np.ndarray
    mse_norm: float
    parent_id: str = ""
    chunk_index: int = 0
    seed: Optional[int] = None


def split_leave_one_material_out(entries: Sequence[dict], material: str
                                 ) -> Tuple[List[dict], List[dict]]:
    """All samples of one material become the test set; the rest train."""
    if material not in MATERIALS:
        raise ValueError(f"unknown material {material!r}")
    train = [e for e in entries if e["material"] != material]
    test = [e for e in entries if e["material"] == material]
    return train, test


def split_categories(categories: Sequence[str], seed: int,
                     counts: Tuple[int, int, int] = CATEGORY_COUNTS
                     ) -> Tuple[List[str], List[str], List[str]]:
    """Deterministic train/val/test category split.

    With exactly ``sum(counts)`` categories the split sizes are ``counts``;
    with fewer, val and test scale proportionally (rounded) and train takes
    the remainder.
    """
    cats = list(categories)
    if len(set(cats)) != len(cats):
        raise ValueError("categories must be unique")
    n = len(cats)
    total = sum(counts)
    if n == total:
        n_val, n_test = counts[1], counts[2]
    else:
        n_val = round(counts[1] * n / total)
        n_test = round(counts[2] * n / total)
    n_train = n - n_val - n_test
    if n_train < 0:
        raise ValueError(f"too few categories ({n}) to split")
    order = np.random.default_rng(seed).permutation(n)
    shuffled = [cats[i] for i in order]
    return (shuffled[:n_train],
            shuffled[n_train:n_train + n_val],
            shuffled[n_train + n_val:])


def model_predictor(params: ModelParams, batch_size: int = 256) -> Predictor:
    """Wrap trained parameters as a features -> positions (mm) callable."""
    def run(features: np.ndarray) -> np.ndarray:
        out = []
        for start in range(0, len(features), batch_size):
            x = np.asarray(features[start:start + batch_size], dtype=np.float64)
            out.append(params.target_norm.denormalize(forward(params, x)))
        return np.concatenate(out)
    return run


def constant_predictor(position_mm) -> Predictor:
    """Baseline that answers the same point for every sample."""
    point = np.asarray(position_mm, dtype=np.float64).reshape(3)
    return lambda features: np.tile(point, (len(features), 1))


def evaluate(predictor: Union[Predictor, ModelParams],
             samples: Sequence[Sample],
             target_norm: TargetNorm,
             seed: Optional[int] = None) -> List[ErrorRecord]:
    """Per-sample Euclidean errors (mm) and normalized-space squared errors."""
    if isinstance(predictor, ModelParams):
        predictor = model_predictor(predictor)
    if not samples:
        return []
    feats = np.stack([s.features for s in samples])
    preds = np.asarray(predictor(feats), dtype=np.float64)
    if preds.shape != (len(samples), 3):
        raise ValueError(f"predictor returned shape {preds.shape}")
    records = []
    for s, pred in zip(samples, preds):
        target = np.asarray(s.target_mm, dtype=np.float64)
        err = float(np.linalg.norm(pred - target))
        diff_norm = target_norm.normalize(pred) - target_norm.normalize(target)
        records.append(ErrorRecord(
            sample_id=s.sample_id, material=s.material, view=s.view,
            region=s.region, scenario=s.scenario, error_mm=err,
            pred_mm=pred, target_mm=target,
            mse_norm=float(np.mean(diff_norm ** 2)),
            parent_id=s.parent_id, chunk_index=s.chunk_index, seed=seed))
    return records


@dataclass
class StatsRow:
    group: Dict[str, object]
    mean_mm: float
    std_mm: float
    mean_mse_norm: float
    count: int


def aggregate(records: Sequence[ErrorRecord],
              group_keys: Sequence[str] = ()) -> List[StatsRow]:
    """Mean/std of Euclidean error and mean normalized MSE per group.

    ``group_keys`` may be any of material, view, region, scenario, seed; an
    empty tuple aggregates everything into one row.  Std is the population
    standard deviation, so a single record reports 0.
    """
    allowed = {"material", "view", "region", "scenario", "seed"}
    bad = set(group_keys) - allowed
    if bad:
        raise ValueError(f"cannot group by {sorted(bad)}")
    groups: Dict[tuple, List[ErrorRecord]] = {}
    for r in records:
        key = tuple(getattr(r, k) for k in group_keys)
        groups.setdefault(key, []).append(r)
    rows = []
    for key in sorted(groups, key=lambda k: tuple(str(v) for v in k)):
        errs = np.array([r.error_mm for r in groups[key]])
        mses = np.array([r.mse_norm for r in groups[key]])
        rows.append(StatsRow(group=dict(zip(group_keys, key)),
                             mean_mm=float(errs.mean()),
                             std_mm=float(errs.std()),
                             mean_mse_norm=float(mses.mean()),
                             count=len(errs)))
    return rows


@dataclass
class TrajectoryReconstruction:
    parent_id: str
    target_polyline: np.ndarray  # (N, 3) mm, chunk order
    predicted_polyline: np.ndarray  # (N, 3) mm
    errors_mm: np.ndarray  # (N,)


def reconstruct_trajectory(records: Sequence[ErrorRecord],
                           smooth_window: Optional[int] = None
                           ) -> TrajectoryReconstruction:
    """Chunk predictions of one stroke, ordered in time.

    Optionally smooths the predicted polyline with a centred moving average
    (window clipped at the ends); targets are never smoothed.
    """
    if not records:
        raise ValueError("no records to reconstruct")
    parents = {r.parent_id for r in records}
    if len(parents) != 1:
        raise ValueError(f"records span multiple strokes: {sorted(parents)}")
    ordered = sorted(records, key=lambda r: r.chunk_index)
    target = np.stack([r.target_mm for r in ordered])
    pred = np.stack([r.pred_mm for r in ordered])
    if smooth_window is not None:
        if smooth_window < 1:
            raise ValueError("smooth_window must be >= 1")
        half = smooth_window // 2
        smoothed = np.empty_like(pred)
        for i in range(len(pred)):
            lo, hi = max(0, i - half), min(len(pred), i + half + 1)
            smoothed[i] = pred[lo:hi].mean(axis=0)
        pred = smoothed
    errors = np.linalg.norm(pred - target, axis=1)
    return TrajectoryReconstruction(parent_id=ordered[0].parent_id,
                                    target_polyline=target,
                                    predicted_polyline=pred,
                                    errors_mm=errors)


# --- CSV export ---


def write_error_records(records: Sequence[ErrorRecord],
                        path: Union[str, Path],
                        comments: Sequence[str] = ()) -> None:
    with open(path, "w", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        fh.write("# per-sample contact localization errors\n")
        fh.write("# error_mm: Euclidean distance in mm; "
                 "mse_norm: squared error in normalized [-1,1] coordinates\n")
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "material", "view", "region", "scenario",
                         "seed", "error_mm", "mse_norm",
                         "pred_x_mm", "pred_y_mm", "pred_z_mm",
                         "target_x_mm", "target_y_mm", "target_z_mm"])
        for r in records:
            writer.writerow([r.sample_id, r.material, r.view, r.region,
                             r.scenario, "" if r.seed is None else r.seed,
                             f"{r.error_mm:.6g}", f"{r.mse_norm:.6g}",
                             *(f"{v:.6g}" for v in r.pred_mm),
                             *(f"{v:.6g}" for v in r.target_mm)])


def write_stats(rows: Sequence[StatsRow], path: Union[str, Path],
                group_keys: Sequence[str],
                comments: Sequence[str] = ()) -> None:
    with open(path, "w", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        fh.write("# aggregated localization errors\n")
        fh.write("# mean_mm/std_mm: Euclidean distance in mm; "
                 "mean_mse_norm: MSE in normalized [-1,1] coordinates\n")
        writer = csv.writer(fh)
        writer.writerow([*group_keys, "mean_mm", "std_mm", "mean_mse_norm", "count"])
        for row in rows:
            writer.writerow([*(row.group[k] for k in group_keys),
                             f"{row.mean_mm:.6g}", f"{row.std_mm:.6g}",
                             f"{row.mean_mse_norm:.6g}", row.count])


def write_trajectory(rec: TrajectoryReconstruction, path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# reconstructed trajectory for stroke {rec.parent_id}\n")
        fh.write("# one row per 200 ms chunk, positions in mm\n")
        writer = csv.writer(fh)
        writer.writerow(["chunk", "target_x_mm", "target_y_mm", "target_z_mm",
                         "pred_x_mm", "pred_y_mm", "pred_z_mm", "error_mm"])
        for i, (t, p, e) in enumerate(zip(rec.target_polyline,
                                          rec.predicted_polyline, rec.errors_mm)):
            writer.writerow([i, *(f"{v:.6g}" for v in t),
                             *(f"{v:.6g}" for v in p), f"{e:.6g}"])
