"""Command-line front end tying the pipeline together.

One binary, six subcommands:

* ``simulate``  render impulse/stroke/drawing datasets to WAV + manifest
* ``sweep``     localization error versus input rate and STFT size
* ``plan``      pen-travel stroke ordering for a multi-stroke drawing
* ``train``     multi-seed training runs on an on-disk dataset
* ``eval``      per-sample errors and aggregate tables for a checkpoint
* ``inspect``   metadata and spectra for a WAV or checkpoint file

Every subcommand accepts ``--seed`` and echoes it (plus a hash of the
resolved configuration) into its output headers so results are auditable.
Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
"""

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import partial
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .checkpoint import load_checkpoint, read_header
from .datasets import Sample, assemble_samples
from .dsp import PipelineConfig
from .errors import CheckpointError, ConfigMismatchError, ManifestError, NumericError
from .evaluate import (SplitSpec, aggregate, evaluate, split_categories,
                       write_error_records, write_stats)
from .io import (MANIFEST_NAME, load_recording, manifest_entry, read_manifest,
                 read_wav, write_manifest, write_wav)
from .model import ModelConfig, TargetNorm
from .planner import GtspInstance, plan_strokes
from .recording import MATERIALS, NUM_CHANNELS
from .runner import (DEFAULT_BATCH, IMPULSE_STEPS, SWEEP_STEPS,
                     SWEEP_TEST_COUNT, SWEEP_TRAIN_COUNT, adapt_pipeline,
                     frequency_sweep, load_split_samples, model_for_pipeline,
                     simulate_drawing_session, train_on_samples)
from .scene import SceneModel, default_scene, load_scene
from .sim import DEFAULT_NOISE_LEVEL, impulse_event, stroke_event, synth_drawing

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

INCOMPLETE_MARKER = "INCOMPLETE"


@dataclass(frozen=True)
class RunConfig:
    """Resolved invocation: subcommand, paths, overrides and seeds.

    ``overrides`` merges the ``--config`` JSON file with explicit flags
    (flags win) and feeds the config hash stamped into output headers.
    """

    subcommand: str
    scene_path: Optional[Path] = None
    manifest: Optional[Path] = None
    out: Optional[Path] = None
    checkpoint: Optional[Path] = None
    overrides: Dict[str, dict] = None
    seed: int = 0
    seed_count: int = 1
    jobs: int = 1

    def __post_init__(self):
        if self.overrides is None:
            object.__setattr__(self, "overrides", {})
        if self.seed_count < 1:
            raise ValueError("seed count must be at least 1")
        if self.jobs < 1:
            raise ValueError("--jobs must be at least 1")
        for path in (self.scene_path, self.manifest, self.checkpoint):
            if path is not None and not Path(path).exists():
                raise FileNotFoundError(f"input path does not exist: {path}")

    def config_hash(self) -> str:
        blob = json.dumps({"subcommand": self.subcommand,
                           "overrides": self.overrides,
                           "seed": self.seed,
                           "seed_count": self.seed_count},
                          sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def header_comments(self) -> List[str]:
        return [f"seed = {self.seed}", f"config = {self.config_hash()}"]


CONFIG_SECTIONS = ("pipeline", "model", "train")


def _load_overrides(config_path: Optional[str]) -> Dict[str, dict]:
    overrides: Dict[str, dict] = {}
    if config_path:
        path = Path(config_path)
        if not path.exists():
            raise FileNotFoundError(f"config file does not exist: {path}")
        with open(path) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError("config file must hold a JSON object")
        for key, value in data.items():
            if key not in CONFIG_SECTIONS:
                raise ValueError(f"unknown config section {key!r} "
                                 f"(expected one of {CONFIG_SECTIONS})")
            if not isinstance(value, dict):
                raise ValueError(f"config section {key!r} must be an object")
            overrides[key] = dict(value)
    return overrides


def _flag_override(overrides: Dict[str, dict], section: str, key: str, value) -> None:
    if value is not None:
        overrides.setdefault(section, {})[key] = value


def make_run_config(args: argparse.Namespace) -> RunConfig:
    overrides = _load_overrides(getattr(args, "config", None))
    _flag_override(overrides, "train", "total_steps", getattr(args, "steps", None))
    _flag_override(overrides, "train", "batch_size", getattr(args, "batch_size", None))
    _flag_override(overrides, "pipeline", "target_rate_hz", getattr(args, "rate", None))
    _flag_override(overrides, "pipeline", "n_fft", getattr(args, "n_fft", None))
    return RunConfig(
        subcommand=args.command,
        scene_path=_opt_path(getattr(args, "scene", None)),
        manifest=_opt_path(getattr(args, "manifest", None)),
        out=_opt_path(getattr(args, "out", None), must_exist=False),
        checkpoint=_opt_path(getattr(args, "checkpoint", None)),
        overrides=overrides,
        seed=getattr(args, "seed", 0),
        seed_count=getattr(args, "seeds", 1),
        jobs=getattr(args, "jobs", 1))


def _opt_path(value, must_exist: bool = True) -> Optional[Path]:
    if value is None:
        return None
    path = Path(value)
    if must_exist and not path.exists():
        raise FileNotFoundError(f"input path does not exist: {path}")
    return path


def _resolve_scene(run: RunConfig) -> SceneModel:
    if run.scene_path is not None:
        return load_scene(run.scene_path)
    return default_scene()


def _resolve_pipeline(run: RunConfig) -> PipelineConfig:
    over = dict(run.overrides.get("pipeline", {}))
    rate = over.pop("target_rate_hz", None)
    n_fft = over.pop("n_fft", None)
    if rate is not None or n_fft is not None:
        pipe = adapt_pipeline(int(rate or 20000), int(n_fft or 128))
    else:
        pipe = PipelineConfig()
    if over:
        pipe = replace(pipe, **over)
    return pipe


def _resolve_model(run: RunConfig, pipeline: PipelineConfig) -> ModelConfig:
    cfg = model_for_pipeline(pipeline)
    over = run.overrides.get("model", {})
    if over:
        cfg = replace(cfg, **over)
    return cfg


def _train_settings(run: RunConfig) -> Dict[str, int]:
    over = run.overrides.get("train", {})
    return {"total_steps": int(over.get("total_steps", IMPULSE_STEPS)),
            "batch_size": int(over.get("batch_size", DEFAULT_BATCH))}


def _ensure_out_dir(run: RunConfig) -> Path:
    if run.out is None:
        raise ValueError("--out is required for this subcommand")
    run.out.mkdir(parents=True, exist_ok=True)
    return run.out


def _atomic_csv(path: Path, comments: Sequence[str], header: Sequence[str],
                rows: Sequence[Sequence]) -> None:
    """Write a commented CSV through a temp file so readers never see a
    partially written table."""
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    os.replace(tmp, path)


def _write_run_summary(run: RunConfig, out_dir: Path, extra: dict) -> None:
    payload = {"subcommand": run.subcommand, "seed": run.seed,
               "config": run.config_hash(), "overrides": run.overrides}
    payload.update(extra)
    tmp = out_dir / "run.json.tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, out_dir / "run.json")


# --------------------------------------------------------------------------
# simulate


def _sim_event(kind: str, scene: SceneModel, materials: List[str],
               count_per_material: int, scenario: str, seed: int,
               noise_level: float, idx: int):
    if kind == "impulse":
        return impulse_event(scene, materials, count_per_material, scenario,
                             seed, idx, noise_level)
    return stroke_event(scene, materials, count_per_material, scenario,
                        seed, idx, noise_level)


def _iter_events(run: RunConfig, kind: str, scene: SceneModel,
                 materials: List[str], count_per_material: int,
                 scenario: str, noise_level: float):
    """Yield events in index order, optionally through a worker pool.

    Each event owns an independent RNG stream keyed by (seed, index), so
    the parallel path is bit-identical to the serial one.
    """
    n = len(materials) * count_per_material
    worker = partial(_sim_event, kind, scene, materials, count_per_material,
                     scenario, run.seed, noise_level)
    if run.jobs == 1:
        for idx in range(n):
            yield worker(idx)
        return
    chunk = max(1, n // (run.jobs * 4))
    with ProcessPoolExecutor(max_workers=run.jobs) as pool:
        yield from pool.map(worker, range(n), chunksize=chunk)


def _write_recordings(out_dir: Path, prefix: str, recordings) -> List[dict]:
    wav_dir = out_dir / "wav"
    wav_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for idx, rec in enumerate(recordings):
        rel = f"wav/{prefix}_{idx:05d}.wav"
        write_wav(out_dir / rel, rec.channels, rec.sample_rate)
        entries.append(manifest_entry(rec, f"{prefix}_{idx:05d}", rel))
    return entries


def cmd_simulate(run: RunConfig, args: argparse.Namespace) -> int:
    scene = _resolve_scene(run)
    out_dir = _ensure_out_dir(run)
    marker = out_dir / INCOMPLETE_MARKER
    marker.write_text("dataset generation in progress\n")
    try:
        if args.kind == "drawing":
            drawing = synth_drawing(run.seed, stroke_count=args.strokes)
            recs, plan = simulate_drawing_session(
                scene, drawing, material=args.material,
                scenario=args.scenario, seed=run.seed,
                noise_level=args.noise_level)
            entries = _write_recordings(out_dir, "drawing", recs)
            plan_payload = {"seed": run.seed, "config": run.config_hash(),
                            "stroke_count": len(recs)}
            plan_payload.update(plan.to_dict())
            with open(out_dir / "plan.json", "w") as fh:
                json.dump(plan_payload, fh, indent=2, sort_keys=True)
                fh.write("\n")
            print(f"planned {len(recs)} strokes, pen travel "
                  f"{plan.cost_mm:.1f} mm")
        else:
            materials = args.materials.split(",") if args.materials \
                else list(MATERIALS)
            for mat in materials:
                if mat not in MATERIALS:
                    raise ValueError(f"unknown material {mat!r}")
            entries = _write_recordings(
                out_dir, args.kind,
                _iter_events(run, args.kind, scene, materials, args.count,
                             args.scenario, args.noise_level))
        write_manifest(entries, out_dir / MANIFEST_NAME)
        _write_run_summary(run, out_dir, {"kind": args.kind,
                                          "recordings": len(entries)})
    except BaseException:
        marker.write_text("dataset generation failed; contents are partial\n")
        raise
    marker.unlink()
    print(f"seed = {run.seed}")
    print(f"config = {run.config_hash()}")
    print(f"wrote {len(entries)} {args.kind} recordings to {out_dir}")
    return EXIT_OK


# --------------------------------------------------------------------------
# plan


def _load_drawing(path: Path) -> List[np.ndarray]:
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, list) or not data:
        raise ValueError("drawing file must hold a non-empty JSON list of strokes")
    strokes = []
    for i, stroke in enumerate(data):
        arr = np.asarray(stroke, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 2 or arr.shape[1] not in (2, 3):
            raise ValueError(f"stroke {i} must be an (N>=2, 2 or 3) array")
        # a leading time column is allowed and ignored
        strokes.append(arr[:, -2:])
    return strokes


def cmd_plan(run: RunConfig, args: argparse.Namespace) -> int:
    if args.drawing:
        strokes = _load_drawing(_opt_path(args.drawing))
    else:
        strokes = [np.asarray(s, dtype=np.float64)[:, 1:3]
                   for s in synth_drawing(run.seed, stroke_count=args.strokes)]
    home = np.asarray([float(v) for v in args.home.split(",")], dtype=np.float64)
    if home.shape != (2,):
        raise ValueError("--home must be 'u,v'")
    instance = GtspInstance(tuple(strokes), home)
    plan = plan_strokes(instance)
    payload = {"seed": run.seed, "config": run.config_hash(),
               "stroke_count": len(strokes)}
    payload.update(plan.to_dict())
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if run.out is not None:
        run.out.parent.mkdir(parents=True, exist_ok=True)
        tmp = run.out.with_suffix(run.out.suffix + ".tmp")
        tmp.write_text(text)
        os.replace(tmp, run.out)
    else:
        sys.stdout.write(text)
    print(f"ordered {len(strokes)} strokes, pen travel {plan.cost_mm:.1f} mm",
          file=sys.stderr)
    return EXIT_OK


# --------------------------------------------------------------------------
# train


def _split_for_training(run: RunConfig, args: argparse.Namespace,
                        pipeline: PipelineConfig):
    """Return (train, val, test) sample lists from the manifest.

    With ``--hold-out`` the test set is every recording of that material
    and a tenth of the training parents become the validation set; without
    it the parents are split 80/10/10.
    """
    if args.hold_out:
        spec = SplitSpec(held_out_material=args.hold_out, scenario=args.scenario)
        train_all, test = load_split_samples(run.manifest, spec, pipeline)
        parents = sorted({s.parent_id for s in train_all})
        keep, val_parents, rest = split_categories(parents, seed=run.seed)
        val_set = set(val_parents)
        train = [s for s in train_all if s.parent_id not in val_set]
        val = [s for s in train_all if s.parent_id in val_set]
        return train, val, test
    entries = read_manifest(run.manifest)
    spec_scenario = args.scenario
    if spec_scenario != "both":
        entries = [e for e in entries if e["scenario"] == spec_scenario]
    if not entries:
        raise ManifestError("no recordings match the requested scenario")
    parents = sorted(e["id"] for e in entries)
    train_p, val_p, test_p = split_categories(parents, seed=run.seed)
    buckets = {pid: "train" for pid in train_p}
    buckets.update({pid: "val" for pid in val_p})
    buckets.update({pid: "test" for pid in test_p})
    base = run.manifest.parent
    out = {"train": [], "val": [], "test": []}
    for entry in entries:
        rec = load_recording(entry, base)
        out[buckets[entry["id"]]].extend(assemble_samples(entry, rec, pipeline))
    return out["train"], out["val"], out["test"]


def cmd_train(run: RunConfig, args: argparse.Namespace) -> int:
    scene = _resolve_scene(run)
    out_dir = _ensure_out_dir(run)
    pipeline = _resolve_pipeline(run)
    model_cfg = _resolve_model(run, pipeline)
    settings = _train_settings(run)
    train, val, test = _split_for_training(run, args, pipeline)
    if not train:
        raise ManifestError("manifest yields an empty training split")
    log.info("training on %d samples (val %d, test %d), %d steps",
             len(train), len(val), len(test), settings["total_steps"])
    all_records = []
    seed_means = {}
    for seed in range(run.seed, run.seed + run.seed_count):
        seed_dir = out_dir / f"seed{seed}"
        seed_dir.mkdir(parents=True, exist_ok=True)
        params, result = train_on_samples(
            train, scene, model_cfg,
            steps=settings["total_steps"], batch_size=settings["batch_size"],
            model_seed=seed, val_samples=val or None,
            log_path=seed_dir / "loss.csv",
            checkpoint_dir=seed_dir,
            log_comments=[f"seed = {seed}", f"config = {run.config_hash()}"])
        if test:
            records = evaluate(params, test, params.target_norm, seed=seed)
            all_records.extend(records)
            mean = float(np.mean([r.error_mm for r in records]))
        else:
            mean = float("nan")
        seed_means[seed] = mean
        print(f"seed {seed}: final train loss {result.final_train_loss:.3e}, "
              f"test mean {mean:.2f} mm")
    if all_records:
        write_error_records(all_records, out_dir / "errors.csv",
                            comments=run.header_comments())
        write_stats(aggregate(all_records, ("material", "seed")),
                    out_dir / "stats_material_seed.csv", ("material", "seed"),
                    comments=run.header_comments())
        write_stats(aggregate(all_records, ("material",)),
                    out_dir / "stats_material.csv", ("material",),
                    comments=run.header_comments())
    _write_run_summary(run, out_dir, {
        "model": model_cfg.to_dict(), "train": settings,
        "samples": {"train": len(train), "val": len(val), "test": len(test)},
        "test_mean_mm": seed_means})
    print(f"seed = {run.seed}")
    print(f"config = {run.config_hash()}")
    return EXIT_OK


# --------------------------------------------------------------------------
# eval


def _gather_eval_samples(run: RunConfig, args: argparse.Namespace,
                         pipeline: PipelineConfig) -> List[Sample]:
    entries = read_manifest(run.manifest)
    if args.scenario != "both":
        entries = [e for e in entries if e["scenario"] == args.scenario]
    if args.hold_out:
        if args.hold_out not in MATERIALS:
            raise ValueError(f"unknown material {args.hold_out!r}")
        entries = [e for e in entries if e["material"] == args.hold_out]
    if not entries:
        raise ManifestError("no recordings match the requested filters")
    samples: List[Sample] = []
    base = run.manifest.parent
    for entry in entries:
        rec = load_recording(entry, base)
        samples.extend(assemble_samples(entry, rec, pipeline))
    return samples


def cmd_eval(run: RunConfig, args: argparse.Namespace) -> int:
    out_dir = _ensure_out_dir(run)
    pipeline = _resolve_pipeline(run)
    samples = _gather_eval_samples(run, args, pipeline)
    if args.perfect_stub:
        targets = np.stack([s.target_mm for s in samples])
        predictor = lambda feats: targets  # noqa: E731 - ground-truth stub
        norm = TargetNorm.from_box(_resolve_scene(run).workspace)
    else:
        params = load_checkpoint(run.checkpoint)
        expected = (params.config.channels, params.config.input_t,
                    params.config.input_f)
        got = samples[0].features.shape
        if tuple(got) != expected:
            raise ValueError(
                f"feature tensor {tuple(got)} does not match the checkpoint's "
                f"input {expected}; pass the training pipeline settings via "
                f"--config / --rate / --n-fft")
        predictor = params
        norm = params.target_norm
    records = evaluate(predictor, samples, norm, seed=run.seed)
    write_error_records(records, out_dir / "errors.csv",
                        comments=run.header_comments())
    for keys, name in ((("material",), "stats_material.csv"),
                       (("view",), "stats_view.csv")):
        write_stats(aggregate(records, keys), out_dir / name, keys,
                    comments=run.header_comments())
    mean = float(np.mean([r.error_mm for r in records]))
    _write_run_summary(run, out_dir, {"samples": len(records),
                                      "mean_mm": mean})
    print(f"seed = {run.seed}")
    print(f"config = {run.config_hash()}")
    print(f"evaluated {len(records)} samples: mean error {mean:.2f} mm")
    for row in aggregate(records, ("material",)):
        print(f"  {row.group['material']:13s} {row.mean_mm:8.2f} mm "
              f"(n={row.count})")
    return EXIT_OK


# --------------------------------------------------------------------------
# sweep


def cmd_sweep(run: RunConfig, args: argparse.Namespace) -> int:
    scene = _resolve_scene(run)
    rates = [int(v) for v in args.rates.split(",")]
    n_ffts = [int(v) for v in args.n_ffts.split(",")]
    materials = args.materials.split(",")
    for mat in materials:
        if mat not in MATERIALS:
            raise ValueError(f"unknown material {mat!r}")
    if run.out is None:
        raise ValueError("--out is required for sweep")
    seeds = list(range(run.seed, run.seed + run.seed_count))
    cells = frequency_sweep(
        scene, rates, n_ffts, seeds=seeds,
        train_count=args.train_count, test_count=args.test_count,
        steps=args.steps if args.steps else SWEEP_STEPS,
        materials=materials, data_seed=run.seed,
        noise_level=args.noise_level)
    rows = [[c.target_rate_hz, c.n_fft, c.hop, len(seeds),
             f"{c.mean_mm:.6g}", f"{c.std_mm:.6g}"] for c in cells]
    run.out.parent.mkdir(parents=True, exist_ok=True)
    _atomic_csv(run.out,
                run.header_comments() + [
                    "test error versus input rate and STFT size; "
                    f"{len(seeds)} models per cell"],
                ["target_rate_hz", "n_fft", "hop", "seeds",
                 "mean_mm", "std_mm"], rows)
    print(f"seed = {run.seed}")
    print(f"config = {run.config_hash()}")
    for cell in cells:
        print(f"rate {cell.target_rate_hz:6d} Hz, n_fft {cell.n_fft:4d}: "
              f"{cell.mean_mm:7.2f} +/- {cell.std_mm:.2f} mm")
    return EXIT_OK


# --------------------------------------------------------------------------
# inspect


def _inspect_checkpoint(path: Path) -> None:
    header = read_header(path)
    cfg = header["config"]
    print(f"checkpoint: {path}")
    print(f"  model: embed_dim={cfg['embed_dim']} depth={cfg['depth']} "
          f"heads={cfg['heads']} input=({cfg['channels']},{cfg['input_t']},"
          f"{cfg['input_f']})")
    norm = header["target_norm"]
    print(f"  target center (mm): {norm['center_mm']}")
    print(f"  target half extent (mm): {norm['half_extent_mm']}")
    total = 0
    for name, meta in header["tensors"].items():
        count = int(np.prod(meta["shape"]))
        total += count
        print(f"  {name:22s} {str(tuple(meta['shape'])):14s} {count:8d}")
    print(f"  parameters: {total}")
    print(f"  payload bytes: {header['payload_bytes']}")


def _inspect_wav(run: RunConfig, path: Path) -> None:
    channels, rate = read_wav(path)
    n = channels.shape[1]
    print(f"recording: {path}")
    print(f"  channels: {channels.shape[0]}, rate: {rate} Hz, "
          f"duration: {1000.0 * n / rate:.1f} ms")
    entry = _find_manifest_entry(path)
    if entry is not None:
        print(f"  kind: {entry['kind']}, material: {entry['material']}, "
              f"view: {entry['view']}, region: {entry['region']}, "
              f"scenario: {entry['scenario']}")
    print(f"  peak amplitude: {float(np.max(np.abs(channels))):.4g}")
    spectra = np.abs(np.fft.rfft(channels, axis=1)) / n
    freqs = np.fft.rfftfreq(n, d=1.0 / rate)
    energy = spectra ** 2
    frac = float(energy[:, freqs < 20000.0].sum() / energy.sum())
    print(f"  spectral energy below 20 kHz: {100.0 * frac:.2f}%")
    if run.out is not None:
        run.out.parent.mkdir(parents=True, exist_ok=True)
        header = ["freq_hz"] + [f"ch{i}_mag" for i in range(channels.shape[0])]
        rows = [[f"{freqs[k]:.6g}"] + [f"{spectra[i, k]:.6g}"
                                       for i in range(channels.shape[0])]
                for k in range(len(freqs))]
        _atomic_csv(run.out,
                    run.header_comments() + [
                        "per-channel magnitude spectra, linear |rfft|/n"],
                    header, rows)
        print(f"  spectra written to {run.out}")


def _find_manifest_entry(wav_path: Path) -> Optional[dict]:
    """Look for a manifest next to (or one level above) the WAV file and
    return the entry describing it, if any."""
    for base in (wav_path.parent, wav_path.parent.parent):
        manifest = base / MANIFEST_NAME
        if not manifest.exists():
            continue
        try:
            entries = read_manifest(manifest)
        except ManifestError:
            return None
        for entry in entries:
            if (base / entry["path"]).resolve() == wav_path.resolve():
                return entry
    return None


def cmd_inspect(run: RunConfig, args: argparse.Namespace) -> int:
    path = _opt_path(args.path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
    print(f"seed = {run.seed}")
    print(f"config = {run.config_hash()}")
    if magic == b"VLC1":
        _inspect_checkpoint(path)
    elif magic == b"RIFF":
        _inspect_wav(run, path)
    else:
        raise ValueError(f"{path} is neither a checkpoint nor a WAV file")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _add_common(sub: argparse.ArgumentParser, out_help: str) -> None:
    sub.add_argument("--scene", help="scene JSON file (default: packaged scene)")
    sub.add_argument("--seed", type=int, default=0, help="base RNG seed")
    sub.add_argument("--out", help=out_help)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vibroloc",
        description="Simulate, train and evaluate desk-scale vibro-acoustic "
                    "contact localization.")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="increase log verbosity (repeatable)")
    subs = parser.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", help="render a synthetic dataset")
    _add_common(sim, "output dataset directory")
    sim.add_argument("--kind", choices=("impulse", "stroke", "drawing"),
                     default="impulse")
    sim.add_argument("--count", type=int, default=10,
                     help="recordings per material (impulse/stroke)")
    sim.add_argument("--materials", help="comma-separated material subset")
    sim.add_argument("--material", default="wood",
                     help="material for drawing sessions")
    sim.add_argument("--scenario", choices=("fixed", "moving"), default="fixed")
    sim.add_argument("--strokes", type=int, default=5,
                     help="stroke count for drawing sessions")
    sim.add_argument("--noise-level", type=float, default=DEFAULT_NOISE_LEVEL)
    sim.add_argument("--jobs", type=int, default=1,
                     help="worker processes for event generation")
    sim.set_defaults(func=cmd_simulate)

    plan = subs.add_parser("plan", help="order strokes to minimize pen travel")
    plan.add_argument("--drawing", help="JSON file of stroke polylines")
    plan.add_argument("--strokes", type=int, default=5,
                      help="stroke count when synthesizing a drawing")
    plan.add_argument("--home", default="0,0", help="pen park position 'u,v'")
    plan.add_argument("--seed", type=int, default=0)
    plan.add_argument("--out", help="plan JSON path (default: stdout)")
    plan.set_defaults(func=cmd_plan)

    train = subs.add_parser("train", help="train models on a dataset")
    _add_common(train, "output directory for checkpoints and tables")
    train.add_argument("--manifest", required=True, help="dataset manifest")
    train.add_argument("--hold-out", choices=MATERIALS,
                       help="leave-one-material-out test material")
    train.add_argument("--scenario", choices=("fixed", "moving", "both"),
                       default="both")
    train.add_argument("--seeds", type=int, default=1,
                       help="number of model seeds to train")
    train.add_argument("--config", help="JSON config overrides")
    train.add_argument("--steps", type=int, help="training steps")
    train.add_argument("--batch-size", type=int)
    train.add_argument("--rate", type=int, help="pipeline target rate (Hz)")
    train.add_argument("--n-fft", type=int)
    train.set_defaults(func=cmd_train)

    ev = subs.add_parser("eval", help="evaluate a checkpoint on a dataset")
    _add_common(ev, "output directory for error tables")
    ev.add_argument("--manifest", required=True)
    source = ev.add_mutually_exclusive_group(required=True)
    source.add_argument("--checkpoint", help="model checkpoint to evaluate")
    source.add_argument("--perfect-stub", action="store_true",
                        help="use a ground-truth predictor (plumbing check)")
    ev.add_argument("--hold-out", choices=MATERIALS,
                    help="restrict to one material")
    ev.add_argument("--scenario", choices=("fixed", "moving", "both"),
                    default="both")
    ev.add_argument("--config", help="JSON config overrides")
    ev.add_argument("--rate", type=int)
    ev.add_argument("--n-fft", type=int)
    ev.set_defaults(func=cmd_eval)

    sweep = subs.add_parser("sweep",
                            help="error versus input rate and STFT size")
    _add_common(sweep, "output CSV path")
    sweep.add_argument("--rates", required=True,
                       help="comma-separated target rates in Hz")
    sweep.add_argument("--n-ffts", default="128",
                       help="comma-separated STFT sizes")
    sweep.add_argument("--seeds", type=int, default=3,
                       help="models per grid cell")
    sweep.add_argument("--materials", default="metal")
    sweep.add_argument("--train-count", type=int, default=SWEEP_TRAIN_COUNT)
    sweep.add_argument("--test-count", type=int, default=SWEEP_TEST_COUNT)
    sweep.add_argument("--steps", type=int)
    sweep.add_argument("--noise-level", type=float, default=DEFAULT_NOISE_LEVEL)
    sweep.set_defaults(func=cmd_sweep)

    ins = subs.add_parser("inspect", help="describe a WAV or checkpoint file")
    ins.add_argument("path", help="WAV or checkpoint file")
    ins.add_argument("--seed", type=int, default=0)
    ins.add_argument("--out", help="spectra CSV path (WAV inputs)")
    ins.set_defaults(func=cmd_inspect)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else (
        logging.INFO if args.verbose == 1 else logging.DEBUG)
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run = make_run_config(args)
        return args.func(run, args)
    except NumericError as exc:
        print(f"error: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ManifestError, CheckpointError, ConfigMismatchError,
            ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
