"""Training engine: Adam, cosine schedule with linear warmup, seeded batching.

The loop operates on in-memory arrays.  Feature assembly from manifests
lives in :mod:`vibroloc.datasets`; the experiment protocols that call this
live in :mod:`vibroloc.runner`.  Everything here is deterministic given the
config seed: batch order comes from per-epoch derived generator streams and
the optimizer itself has no randomness, so two runs with identical inputs
produce bit-identical parameter trajectories.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from .checkpoint import save_checkpoint
from .errors import NumericError
from .model import ModelParams, backward, forward

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    total_steps: int
    batch_size: int = 128
    peak_lr: float = 7e-4
    warmup_frac: float = 0.01
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.total_steps < 1:
            raise ValueError("total_steps must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if not 0.0 < self.warmup_frac < 1.0:
            raise ValueError("warmup_frac must lie strictly between 0 and 1")
        if self.peak_lr <= 0:
            raise ValueError("peak_lr must be positive")

    @property
    def warmup_steps(self) -> int:
        # at least one warmup step so the schedule always starts at zero
        return max(1, round(self.warmup_frac * self.total_steps))


def lr_at(step: int, cfg: TrainConfig) -> float:
    """Learning rate at an optimization step.

    Linear ramp from 0 to ``peak_lr`` over the warmup steps, then a cosine
    decay to 0 at ``total_steps``.  Continuous at the boundary.
    """
    if not 0 <= step <= cfg.total_steps:
        raise ValueError(f"step {step} outside [0, {cfg.total_steps}]")
    w = cfg.warmup_steps
    if step <= w:
        return cfg.peak_lr * step / w
    span = cfg.total_steps - w
    return cfg.peak_lr * 0.5 * (1.0 + math.cos(math.pi * (step - w) / span))


@dataclass
class AdamState:
    m: Dict[str, np.ndarray]
    v: Dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def for_params(cls, params: ModelParams) -> "AdamState":
        return cls(m={k: np.zeros_like(t) for k, t in params.tensors.items()},
                   v={k: np.zeros_like(t) for k, t in params.tensors.items()})


def adam_step(params: ModelParams, grads: Dict[str, np.ndarray],
              state: AdamState, lr: float, cfg: TrainConfig) -> None:
    """One bias-corrected Adam update, in place."""
    state.step += 1
    t = state.step
    bc1 = 1.0 - cfg.beta1 ** t
    bc2 = 1.0 - cfg.beta2 ** t
    for name, tensor in params.tensors.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * (g * g)
        tensor -= lr * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)


@dataclass
class TrainResult:
    params: ModelParams
    best_params: ModelParams
    best_val_mm: float
    history: List[dict] = field(default_factory=list)

    @property
    def final_train_loss(self) -> float:
        return self.history[-1]["train_loss"] if self.history else math.nan


def _batch_indices(n: int, cfg: TrainConfig):
    """Yield batches forever: each epoch is a fresh seeded permutation,
    split into consecutive slices with the last partial batch kept."""
    epoch = 0
    while True:
        order = np.random.default_rng([cfg.seed, epoch]).permutation(n)
        for start in range(0, n, cfg.batch_size):
            yield order[start:start + cfg.batch_size]
        epoch += 1


def _euclidean_mm(params: ModelParams, features: np.ndarray,
                  targets_norm: np.ndarray, batch_size: int = 256) -> float:
    """Mean Euclidean position error in millimetres."""
    errors = []
    for start in range(0, len(features), batch_size):
        x = np.asarray(features[start:start + batch_size], dtype=np.float64)
        preds = forward(params, x)
        pred_mm = params.target_norm.denormalize(preds)
        true_mm = params.target_norm.denormalize(targets_norm[start:start + batch_size])
        errors.append(np.linalg.norm(pred_mm - true_mm, axis=1))
    return float(np.mean(np.concatenate(errors)))


def fit(params: ModelParams,
        features: np.ndarray,
        targets_norm: np.ndarray,
        cfg: TrainConfig,
        val_features: Optional[np.ndarray] = None,
        val_targets_norm: Optional[np.ndarray] = None,
        log_path: Optional[Union[str, Path]] = None,
        checkpoint_dir: Optional[Union[str, Path]] = None,
        log_comments: Sequence[str] = ()) -> TrainResult:
    """Optimize ``params`` on (features, normalized targets).

    Runs exactly ``cfg.total_steps`` Adam updates with the cosine/warmup
    schedule, validating every ``total_steps // 20`` steps when a validation
    split is given.  Writes a CSV log (step, lr, train_loss, val_mm) and, if
    ``checkpoint_dir`` is set, ``best.ckpt`` (lowest validation error) and
    ``final.ckpt``.  A non-finite loss aborts with a diagnostic record.
    """
    n = len(features)
    if n == 0:
        raise ValueError("training split is empty")
    if len(targets_norm) != n:
        raise ValueError("features and targets disagree in length")
    targets_norm = np.asarray(targets_norm, dtype=np.float64)

    val_every = max(1, cfg.total_steps // 20)
    have_val = val_features is not None and len(val_features) > 0
    state = AdamState.for_params(params)
    batches = _batch_indices(n, cfg)
    history: List[dict] = []
    best_val = math.inf
    best_params = params.copy()

    ckpt_dir = Path(checkpoint_dir) if checkpoint_dir is not None else None
    if ckpt_dir is not None:
        ckpt_dir.mkdir(parents=True, exist_ok=True)
    writer = None
    log_file = None
    if log_path is not None:
        log_file = open(log_path, "w", newline="")
        for line in log_comments:
            log_file.write(f"# {line}\n")
        writer = csv.writer(log_file)
        writer.writerow(["step", "lr", "train_loss", "val_mm"])

    try:
        for step in range(1, cfg.total_steps + 1):
            idx = next(batches)
            x = np.asarray(features[idx], dtype=np.float64)
            y = targets_norm[idx]
            lr = lr_at(step, cfg)
            try:
                loss, grads = backward(params, x, y)
            except NumericError:
                if writer is not None:
                    writer.writerow([step, f"{lr:.10g}", "nan", ""])
                log.error("non-finite loss at step %d, aborting", step)
                raise
            if not math.isfinite(loss):
                if writer is not None:
                    writer.writerow([step, f"{lr:.10g}", repr(loss), ""])
                raise NumericError(f"non-finite loss {loss} at step {step}")
            adam_step(params, grads, state, lr, cfg)

            row = {"step": step, "lr": lr, "train_loss": loss, "val_mm": math.nan}
            if step % val_every == 0 or step == cfg.total_steps:
                if have_val:
                    row["val_mm"] = _euclidean_mm(params, val_features, val_targets_norm)
                    if row["val_mm"] < best_val:
                        best_val = row["val_mm"]
                        best_params = params.copy()
                        if ckpt_dir is not None:
                            save_checkpoint(best_params, ckpt_dir / "best.ckpt")
                log.info("step %d/%d lr %.3g loss %.5g val %.4g mm",
                         step, cfg.total_steps, lr, loss, row["val_mm"])
            history.append(row)
            if writer is not None:
                val_s = "" if math.isnan(row["val_mm"]) else f"{row['val_mm']:.10g}"
                writer.writerow([step, f"{lr:.10g}", f"{loss:.10g}", val_s])
    finally:
        if log_file is not None:
            log_file.close()

    if not have_val:
        best_params = params.copy()
        best_val = math.nan
    if ckpt_dir is not None:
        save_checkpoint(params, ckpt_dir / "final.ckpt")
        if not have_val:
            save_checkpoint(best_params, ckpt_dir / "best.ckpt")
    return TrainResult(params=params, best_params=best_params,
                       best_val_mm=best_val, history=history)
