"""Experiment protocols: leave-one-material-out runs and frequency sweeps.

These functions glue simulation, feature assembly, training, and evaluation
into the reproducible recipes the command-line tool exposes.  Recordings
are consumed streaming (simulate, assemble features, drop the waveform) so
a 2000-impulse training set peaks around 250 MB of float32 features rather
than several GB of raw audio.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .datasets import Sample, assemble_samples, stack_samples
from .dsp import PipelineConfig, stft_frame_count
from .evaluate import (
    ErrorRecord,
    SplitSpec,
    aggregate,
    constant_predictor,
    evaluate,
    split_leave_one_material_out,
)
from .io import iter_dataset, load_recording, manifest_entry, read_manifest
from .model import ModelConfig, ModelParams, TargetNorm, init_params
from .planner import GtspInstance, StrokePlan, apply_plan, plan_strokes
from .recording import MATERIALS, Recording
from .scene import SceneModel
from .sim import (
    DEFAULT_NOISE_LEVEL,
    DEFAULT_PEN_SPEED_MM_S,
    drawing_trajectories,
    iter_impulse_dataset,
    iter_stroke_dataset,
    simulate_stroke,
    time_stroke,
)
from .train import TrainConfig, TrainResult, fit

log = logging.getLogger(__name__)

# desk-scale protocol budgets
IMPULSE_TRAIN_COUNT = 2000
IMPULSE_TEST_COUNT = 500
IMPULSE_STEPS = 3000
STROKE_TRAIN_PER_MATERIAL_SCENARIO = 15
STROKE_TEST_PER_SCENARIO = 12
STROKE_STEPS = 800
SWEEP_TRAIN_COUNT = 800
SWEEP_TEST_COUNT = 200
SWEEP_STEPS = 2000
DEFAULT_BATCH = 128


def adapt_pipeline(target_rate_hz: int, n_fft: int = 128,
                   base: PipelineConfig = PipelineConfig()) -> PipelineConfig:
    """Pipeline for a sweep cell; halves the hop until enough STFT frames
    remain for at least one patch row at low rates."""
    window_ms = base.trim_end_ms - base.trim_start_ms
    n = round(window_ms * target_rate_hz / 1000.0)
    if n < n_fft:
        raise ValueError(f"rate {target_rate_hz} Hz gives a {n}-sample window, "
                         f"shorter than n_fft={n_fft}")
    hop = n_fft // 2
    while stft_frame_count(n, n_fft, hop) < ModelConfig().kernel and hop > 1:
        hop //= 2
    if stft_frame_count(n, n_fft, hop) < ModelConfig().kernel:
        raise ValueError(f"cannot reach {ModelConfig().kernel} STFT frames "
                         f"at {target_rate_hz} Hz with n_fft={n_fft}")
    return replace(base, target_rate_hz=target_rate_hz, n_fft=n_fft, hop=hop)


def model_for_pipeline(pipeline: PipelineConfig,
                       base: ModelConfig = ModelConfig()) -> ModelConfig:
    """Model dimensions matching a pipeline's spectrogram geometry."""
    window_ms = pipeline.trim_end_ms - pipeline.trim_start_ms
    n = round(window_ms * pipeline.target_rate_hz / 1000.0)
    return replace(base, input_t=stft_frame_count(n, pipeline.n_fft, pipeline.hop),
                   input_f=pipeline.n_bins)


def train_on_samples(samples: Sequence[Sample], scene: SceneModel,
                     model_config: ModelConfig, steps: int, batch_size: int,
                     model_seed: int,
                     val_samples: Optional[Sequence[Sample]] = None,
                     log_path=None, checkpoint_dir=None,
                     log_comments: Sequence[str] = ()
                     ) -> Tuple[ModelParams, TrainResult]:
    """Train a fresh model on assembled samples; targets are normalized to
    the scene workspace."""
    norm = TargetNorm.from_box(scene.workspace)
    feats, targets_mm = stack_samples(samples)
    targets = norm.normalize(targets_mm)
    val_feats = val_targets = None
    if val_samples:
        val_feats, val_mm = stack_samples(val_samples)
        val_targets = norm.normalize(val_mm)
    params = init_params(model_config, model_seed, norm)
    cfg = TrainConfig(total_steps=steps, batch_size=batch_size, seed=model_seed)
    result = fit(params, feats, targets, cfg,
                 val_features=val_feats, val_targets_norm=val_targets,
                 log_path=log_path, checkpoint_dir=checkpoint_dir,
                 log_comments=log_comments)
    return params, result


def _assemble_stream(recordings: Iterable[Recording], prefix: str,
                     pipeline: PipelineConfig,
                     limit: Optional[int] = None) -> List[Sample]:
    samples: List[Sample] = []
    for i, rec in enumerate(recordings):
        if limit is not None and i >= limit:
            break
        entry = manifest_entry(rec, f"{prefix}_{i:05d}", f"wav/{prefix}_{i:05d}.wav")
        samples.extend(assemble_samples(entry, rec, pipeline))
    return samples


@dataclass
class SplitRunResult:
    held_out: str
    seed: int
    records: List[ErrorRecord]
    mean_mm: float
    baseline_mm: float
    params: ModelParams
    train_result: TrainResult

    @property
    def baseline_ratio(self) -> float:
        return self.mean_mm / self.baseline_mm


def assemble_impulse_split(scene: SceneModel, held_out: str,
                           train_count: int = IMPULSE_TRAIN_COUNT,
                           test_count: int = IMPULSE_TEST_COUNT,
                           scenario: str = "fixed", data_seed: int = 0,
                           noise_level: float = DEFAULT_NOISE_LEVEL,
                           pipeline: PipelineConfig = PipelineConfig()
                           ) -> Tuple[List[Sample], List[Sample]]:
    """Simulate and featurize one leave-one-material-out impulse split.

    The training set draws equally from the three kept materials (the last
    material is short by up to two events when the count does not divide by
    three); the test set is entirely the held-out material.
    """
    if held_out not in MATERIALS:
        raise ValueError(f"unknown material {held_out!r}")
    kept = [m for m in MATERIALS if m != held_out]
    per_mat = math.ceil(train_count / len(kept))
    train = _assemble_stream(
        iter_impulse_dataset(scene, per_mat, scenario, seed=data_seed,
                             noise_level=noise_level, materials=kept),
        "tr", pipeline, limit=train_count)
    test = _assemble_stream(
        iter_impulse_dataset(scene, test_count, scenario, seed=data_seed + 1,
                             noise_level=noise_level, materials=[held_out]),
        "te", pipeline)
    log.info("impulse split hold-out=%s: %d train / %d test samples",
             held_out, len(train), len(test))
    return train, test


def run_impulse_split(scene: SceneModel, held_out: str, model_seed: int = 0,
                      train_count: int = IMPULSE_TRAIN_COUNT,
                      test_count: int = IMPULSE_TEST_COUNT,
                      steps: int = IMPULSE_STEPS, batch_size: int = DEFAULT_BATCH,
                      scenario: str = "fixed", data_seed: int = 0,
                      noise_level: float = DEFAULT_NOISE_LEVEL,
                      pipeline: PipelineConfig = PipelineConfig(),
                      model_config: Optional[ModelConfig] = None,
                      log_path=None, checkpoint_dir=None,
                      presplit: Optional[Tuple[List[Sample], List[Sample]]] = None
                      ) -> SplitRunResult:
    """One held-out-material impulse run: simulate, train, evaluate.

    ``presplit`` lets multi-seed protocols reuse the assembled features.
    """
    if presplit is None:
        presplit = assemble_impulse_split(scene, held_out, train_count, test_count,
                                          scenario, data_seed, noise_level, pipeline)
    train_samples, test_samples = presplit
    if model_config is None:
        model_config = model_for_pipeline(pipeline)
    params, result = train_on_samples(train_samples, scene, model_config, steps,
                                      batch_size, model_seed,
                                      log_path=log_path, checkpoint_dir=checkpoint_dir)
    norm = params.target_norm
    records = evaluate(params, test_samples, norm, seed=model_seed)
    baseline = evaluate(constant_predictor(scene.workspace.center),
                        test_samples, norm)
    mean_mm = float(np.mean([r.error_mm for r in records]))
    baseline_mm = float(np.mean([r.error_mm for r in baseline]))
    log.info("hold-out %s seed %d: %.2f mm (baseline %.2f mm)",
             held_out, model_seed, mean_mm, baseline_mm)
    return SplitRunResult(held_out=held_out, seed=model_seed, records=records,
                          mean_mm=mean_mm, baseline_mm=baseline_mm,
                          params=params, train_result=result)


def impulse_protocol(scene: SceneModel, seeds: Sequence[int] = (0,),
                     materials: Sequence[str] = MATERIALS,
                     **split_kwargs) -> List[SplitRunResult]:
    """Full leave-one-material-out protocol over seeds; features are
    assembled once per split and shared across model seeds."""
    results = []
    for held_out in materials:
        presplit = assemble_impulse_split(
            scene, held_out,
            train_count=split_kwargs.get("train_count", IMPULSE_TRAIN_COUNT),
            test_count=split_kwargs.get("test_count", IMPULSE_TEST_COUNT),
            scenario=split_kwargs.get("scenario", "fixed"),
            data_seed=split_kwargs.get("data_seed", 0),
            noise_level=split_kwargs.get("noise_level", DEFAULT_NOISE_LEVEL),
            pipeline=split_kwargs.get("pipeline", PipelineConfig()))
        for seed in seeds:
            results.append(run_impulse_split(
                scene, held_out, model_seed=seed, presplit=presplit,
                **split_kwargs))
    return results


@dataclass
class StrokeSplitResult:
    held_out: str
    seed: int
    records: List[ErrorRecord]
    mean_mm: float
    scenario_mean_mm: Dict[str, float]
    params: ModelParams


def assemble_stroke_split(scene: SceneModel, held_out: str,
                          train_per_material_scenario: int = STROKE_TRAIN_PER_MATERIAL_SCENARIO,
                          test_per_scenario: int = STROKE_TEST_PER_SCENARIO,
                          data_seed: int = 0,
                          noise_level: float = DEFAULT_NOISE_LEVEL,
                          pipeline: PipelineConfig = PipelineConfig()
                          ) -> Tuple[List[Sample], List[Sample]]:
    """Stroke-tracking split: train chunks come from the three kept
    materials in both robot scenarios, test chunks from the held-out
    material, also in both scenarios."""
    if held_out not in MATERIALS:
        raise ValueError(f"unknown material {held_out!r}")
    kept = [m for m in MATERIALS if m != held_out]
    train: List[Sample] = []
    test: List[Sample] = []
    for k, scenario in enumerate(("fixed", "moving")):
        train.extend(_assemble_stream(
            iter_stroke_dataset(scene, train_per_material_scenario, scenario,
                                seed=data_seed + k, noise_level=noise_level,
                                materials=kept),
            f"tr{scenario}", pipeline))
        test.extend(_assemble_stream(
            iter_stroke_dataset(scene, test_per_scenario, scenario,
                                seed=data_seed + 2 + k, noise_level=noise_level,
                                materials=[held_out]),
            f"te{scenario}", pipeline))
    log.info("stroke split hold-out=%s: %d train / %d test chunks",
             held_out, len(train), len(test))
    return train, test


def run_stroke_split(scene: SceneModel, held_out: str, model_seed: int = 0,
                     steps: int = STROKE_STEPS, batch_size: int = DEFAULT_BATCH,
                     data_seed: int = 0,
                     noise_level: float = DEFAULT_NOISE_LEVEL,
                     pipeline: PipelineConfig = PipelineConfig(),
                     model_config: Optional[ModelConfig] = None,
                     presplit: Optional[Tuple[List[Sample], List[Sample]]] = None,
                     **assemble_kwargs) -> StrokeSplitResult:
    """One held-out-material stroke-tracking run."""
    if presplit is None:
        presplit = assemble_stroke_split(scene, held_out, data_seed=data_seed,
                                         noise_level=noise_level,
                                         pipeline=pipeline, **assemble_kwargs)
    train_samples, test_samples = presplit
    if model_config is None:
        model_config = model_for_pipeline(pipeline)
    params, _ = train_on_samples(train_samples, scene, model_config, steps,
                                 batch_size, model_seed)
    records = evaluate(params, test_samples, params.target_norm, seed=model_seed)
    by_scenario = {}
    for scenario in ("fixed", "moving"):
        errs = [r.error_mm for r in records if r.scenario == scenario]
        by_scenario[scenario] = float(np.mean(errs)) if errs else math.nan
    mean_mm = float(np.mean([r.error_mm for r in records]))
    log.info("stroke hold-out %s seed %d: %.2f mm (fixed %.2f / moving %.2f)",
             held_out, model_seed, mean_mm,
             by_scenario["fixed"], by_scenario["moving"])
    return StrokeSplitResult(held_out=held_out, seed=model_seed, records=records,
                             mean_mm=mean_mm, scenario_mean_mm=by_scenario,
                             params=params)


def stroke_protocol(scene: SceneModel, seeds: Sequence[int] = (0, 1, 2),
                    materials: Sequence[str] = MATERIALS,
                    **split_kwargs) -> List[StrokeSplitResult]:
    results = []
    for held_out in materials:
        presplit = assemble_stroke_split(
            scene, held_out,
            train_per_material_scenario=split_kwargs.get(
                "train_per_material_scenario", STROKE_TRAIN_PER_MATERIAL_SCENARIO),
            test_per_scenario=split_kwargs.get(
                "test_per_scenario", STROKE_TEST_PER_SCENARIO),
            data_seed=split_kwargs.get("data_seed", 0),
            noise_level=split_kwargs.get("noise_level", DEFAULT_NOISE_LEVEL),
            pipeline=split_kwargs.get("pipeline", PipelineConfig()))
        for seed in seeds:
            run_kwargs = {k: v for k, v in split_kwargs.items()
                          if k in ("steps", "batch_size", "model_config")}
            results.append(run_stroke_split(scene, held_out, model_seed=seed,
                                            presplit=presplit, **run_kwargs))
    return results


@dataclass
class SweepCell:
    target_rate_hz: int
    n_fft: int
    hop: int
    seed_errors_mm: List[float]

    @property
    def mean_mm(self) -> float:
        return float(np.mean(self.seed_errors_mm))

    @property
    def std_mm(self) -> float:
        return float(np.std(self.seed_errors_mm))


def frequency_sweep(scene: SceneModel, rates: Sequence[int],
                    n_ffts: Sequence[int] = (128,),
                    seeds: Sequence[int] = (0, 1, 2),
                    train_count: int = SWEEP_TRAIN_COUNT,
                    test_count: int = SWEEP_TEST_COUNT,
                    steps: int = SWEEP_STEPS, batch_size: int = DEFAULT_BATCH,
                    materials: Sequence[str] = ("metal",),
                    data_seed: int = 0,
                    noise_level: float = DEFAULT_NOISE_LEVEL) -> List[SweepCell]:
    """Localization error versus input rate and STFT size (Fig.-4 style).

    Uses a plain train/test split (default all-metal, so the informative
    modes sit at 6 and 9 kHz); each cell trains ``seeds`` fresh models on
    the same features.
    """
    per_mat_train = math.ceil(train_count / len(materials))
    per_mat_test = math.ceil(test_count / len(materials))
    cells = []
    for rate in rates:
        for n_fft in n_ffts:
            pipeline = adapt_pipeline(rate, n_fft)
            model_config = model_for_pipeline(pipeline)
            train = _assemble_stream(
                iter_impulse_dataset(scene, per_mat_train, "fixed",
                                     seed=data_seed, noise_level=noise_level,
                                     materials=list(materials)),
                "tr", pipeline, limit=train_count)
            test = _assemble_stream(
                iter_impulse_dataset(scene, per_mat_test, "fixed",
                                     seed=data_seed + 1, noise_level=noise_level,
                                     materials=list(materials)),
                "te", pipeline, limit=test_count)
            errors = []
            for seed in seeds:
                params, _ = train_on_samples(train, scene, model_config, steps,
                                             batch_size, seed)
                records = evaluate(params, test, params.target_norm, seed=seed)
                errors.append(float(np.mean([r.error_mm for r in records])))
            cell = SweepCell(target_rate_hz=rate, n_fft=n_fft,
                             hop=pipeline.hop, seed_errors_mm=errors)
            log.info("sweep cell rate=%d n_fft=%d: %.2f +/- %.2f mm",
                     rate, n_fft, cell.mean_mm, cell.std_mm)
            cells.append(cell)
    return cells


def load_split_samples(manifest_path, spec: SplitSpec,
                       pipeline: PipelineConfig = PipelineConfig()
                       ) -> Tuple[List[Sample], List[Sample]]:
    """Leave-one-material-out split of an on-disk dataset, assembled."""
    manifest_path = Path(manifest_path)
    entries = read_manifest(manifest_path)
    entries = [e for e in entries if spec.scenario_matches(e["scenario"])]
    train_entries, test_entries = split_leave_one_material_out(
        entries, spec.held_out_material)
    base = manifest_path.parent

    def assemble(split):
        samples: List[Sample] = []
        for entry in split:
            rec = load_recording(entry, base)
            samples.extend(assemble_samples(entry, rec, pipeline))
        return samples

    return assemble(train_entries), assemble(test_entries)


def simulate_drawing_session(scene: SceneModel, drawing: Sequence[np.ndarray],
                             material: str = "wood", scenario: str = "moving",
                             seed: int = 0,
                             speed_mm_s: float = DEFAULT_PEN_SPEED_MM_S,
                             noise_level: float = DEFAULT_NOISE_LEVEL
                             ) -> Tuple[List[Recording], StrokePlan]:
    """Simulate drawing a multi-stroke figure in planner order.

    The stroke order and orientations come from the pen-travel planner with
    the pen parked at the patch centre (uv origin); each planned stroke is
    re-timed at constant speed and simulated as its own recording.
    """
    polylines = [np.asarray(s, dtype=np.float64)[:, 1:3] for s in drawing]
    instance = GtspInstance(tuple(polylines), np.zeros(2))
    plan = plan_strokes(instance)
    ordered = apply_plan(instance.strokes, plan)
    timed = [time_stroke(uv, speed_mm_s) for uv in ordered]
    recs = []
    for i, traj in enumerate(drawing_trajectories(scene, timed)):
        recs.append(simulate_stroke(scene, material, traj, scenario,
                                    rng=np.random.default_rng([seed, i]),
                                    noise_level=noise_level))
    return recs, plan
