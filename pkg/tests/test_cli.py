"""Command-line interface tests: subcommand plumbing, exit codes,
reproducibility of artifacts, and header stamping.

Most tests drive ``main()`` in-process; one subprocess test checks the
installed console script.
"""

import json
import subprocess
import sys

import numpy as np
import pytest

from vibroloc import cli
from vibroloc.errors import NumericError
from vibroloc.io import read_manifest

TINY_CFG = {"model": {"embed_dim": 16, "heads": 2}}


def run_cli(*argv):
    return cli.main([str(a) for a in argv])


def simulate_small(tmp_path, name="ds", seed=5, count=1, **extra):
    out = tmp_path / name
    args = ["simulate", "--kind", "impulse", "--count", count,
            "--out", out, "--seed", seed]
    for key, value in extra.items():
        args += [f"--{key}", value]
    assert run_cli(*args) == 0
    return out


def write_tiny_config(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(TINY_CFG))
    return path


# ---------------------------------------------------------------- simulate


def test_simulate_writes_dataset(tmp_path, capsys):
    out = simulate_small(tmp_path, count=2, seed=9)
    entries = read_manifest(out / "manifest.jsonl")
    assert len(entries) == 8  # 4 materials x 2
    for entry in entries:
        assert (out / entry["path"]).exists()
    run_info = json.loads((out / "run.json").read_text())
    assert run_info["seed"] == 9
    assert run_info["recordings"] == 8
    assert not (out / "INCOMPLETE").exists()
    stdout = capsys.readouterr().out
    assert "seed = 9" in stdout


def test_simulate_rerun_is_byte_identical(tmp_path):
    a = simulate_small(tmp_path, "a", seed=3)
    b = simulate_small(tmp_path, "b", seed=3)
    assert (a / "manifest.jsonl").read_bytes() == (b / "manifest.jsonl").read_bytes()
    assert (a / "wav/impulse_00000.wav").read_bytes() == \
        (b / "wav/impulse_00000.wav").read_bytes()


def test_simulate_jobs_matches_serial(tmp_path):
    a = simulate_small(tmp_path, "serial", seed=3)
    b = tmp_path / "parallel"
    assert run_cli("simulate", "--count", 1, "--out", b, "--seed", 3,
                   "--jobs", 2) == 0
    assert (a / "manifest.jsonl").read_bytes() == (b / "manifest.jsonl").read_bytes()
    assert (a / "wav/impulse_00003.wav").read_bytes() == \
        (b / "wav/impulse_00003.wav").read_bytes()


def test_simulate_missing_scene_is_data_error(tmp_path, capsys):
    code = run_cli("simulate", "--scene", tmp_path / "nope.json",
                   "--out", tmp_path / "x", "--count", 1)
    assert code == 3
    assert "does not exist" in capsys.readouterr().err


def test_simulate_drawing_emits_plan(tmp_path):
    out = tmp_path / "draw"
    assert run_cli("simulate", "--kind", "drawing", "--strokes", 3,
                   "--out", out, "--seed", 1) == 0
    plan = json.loads((out / "plan.json").read_text())
    assert sorted(plan["order"]) == [0, 1, 2]
    assert plan["seed"] == 1
    assert len(read_manifest(out / "manifest.jsonl")) == 3


def test_unknown_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as err:
        run_cli("frobnicate")
    assert err.value.code == 2


# -------------------------------------------------------------------- plan


def test_plan_from_drawing_file(tmp_path, capsys):
    drawing = [[[0, 0], [10, 0]], [[30, 30], [30, 10]], [[-20, 5], [-20, 25]]]
    path = tmp_path / "drawing.json"
    path.write_text(json.dumps(drawing))
    assert run_cli("plan", "--drawing", path, "--out", tmp_path / "plan.json") == 0
    plan = json.loads((tmp_path / "plan.json").read_text())
    assert sorted(plan["order"]) == [0, 1, 2]
    assert len(plan["reversed"]) == 3
    assert plan["cost_mm"] > 0


def test_plan_synthetic_to_stdout(capsys):
    assert run_cli("plan", "--strokes", 3, "--seed", 4) == 0
    payload = json.loads(capsys.readouterr().out)
    assert sorted(payload["order"]) == [0, 1, 2]


def test_plan_rejects_bad_drawing(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps([[[1, 2]]]))  # single-point stroke
    assert run_cli("plan", "--drawing", path) == 3


# ------------------------------------------------------------- train / eval


def test_train_then_eval_round_trip(tmp_path):
    ds = simulate_small(tmp_path, count=2, seed=2)
    out = tmp_path / "run"
    assert run_cli("train", "--manifest", ds / "manifest.jsonl", "--out", out,
                   "--seed", 0, "--steps", 8, "--batch-size", 4,
                   "--config", write_tiny_config(tmp_path)) == 0
    seed_dir = out / "seed0"
    assert (seed_dir / "best.ckpt").exists()
    assert (seed_dir / "final.ckpt").exists()
    log_text = (seed_dir / "loss.csv").read_text()
    assert log_text.startswith("# seed = 0\n")
    assert "step,lr,train_loss,val_mm" in log_text

    ev = tmp_path / "ev"
    assert run_cli("eval", "--manifest", ds / "manifest.jsonl",
                   "--checkpoint", seed_dir / "final.ckpt", "--out", ev) == 0
    header = (ev / "errors.csv").read_text().splitlines()[0]
    assert header == "# seed = 0"
    assert (ev / "stats_material.csv").exists()
    assert (ev / "stats_view.csv").exists()


def test_train_twice_same_seed_identical_checkpoints(tmp_path):
    ds = simulate_small(tmp_path, count=1, seed=6)
    cfg = write_tiny_config(tmp_path)
    outs = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        assert run_cli("train", "--manifest", ds / "manifest.jsonl", "--out",
                       out, "--seed", 1, "--steps", 6, "--batch-size", 2,
                       "--config", cfg) == 0
        outs.append(out)
    a = (outs[0] / "seed1/final.ckpt").read_bytes()
    b = (outs[1] / "seed1/final.ckpt").read_bytes()
    assert a == b


def test_flag_overrides_win_over_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"model": TINY_CFG["model"],
                               "train": {"total_steps": 99999}}))
    ds = simulate_small(tmp_path, count=1, seed=8)
    out = tmp_path / "fast"
    assert run_cli("train", "--manifest", ds / "manifest.jsonl", "--out", out,
                   "--seed", 0, "--steps", 5, "--batch-size", 2,
                   "--config", cfg) == 0
    rows = [line for line in (out / "seed0/loss.csv").read_text().splitlines()
            if line and not line.startswith("#")]
    assert len(rows) == 1 + 5  # header plus exactly five steps


def test_eval_perfect_stub_zero_table(tmp_path):
    ds = simulate_small(tmp_path, count=1, seed=4)
    ev = tmp_path / "ev"
    assert run_cli("eval", "--manifest", ds / "manifest.jsonl",
                   "--perfect-stub", "--out", ev, "--seed", 4) == 0
    rows = [line.split(",") for line in
            (ev / "errors.csv").read_text().splitlines()
            if line and not line.startswith("#")]
    header, data = rows[0], rows[1:]
    err_col = header.index("error_mm")
    assert len(data) == 4
    assert all(float(row[err_col]) == 0.0 for row in data)


def test_eval_requires_exactly_one_predictor_source(tmp_path):
    ds = simulate_small(tmp_path, count=1, seed=4)
    with pytest.raises(SystemExit) as err:
        run_cli("eval", "--manifest", ds / "manifest.jsonl",
                "--out", tmp_path / "x")
    assert err.value.code == 2


def test_eval_malformed_manifest_reports_line(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "only-an-id"}\n')
    code = run_cli("eval", "--manifest", bad, "--perfect-stub",
                   "--out", tmp_path / "x")
    assert code == 3
    assert "line 1" in capsys.readouterr().err


def test_numeric_failure_maps_to_exit_4(monkeypatch, tmp_path):
    def explode(run, args):
        raise NumericError("non-finite loss at step 1")
    monkeypatch.setattr(cli, "cmd_train", explode)
    ds = simulate_small(tmp_path, count=1, seed=4)
    code = run_cli("train", "--manifest", ds / "manifest.jsonl",
                   "--out", tmp_path / "x")
    assert code == 4


# ------------------------------------------------------------------- sweep


def test_sweep_row_per_cell(tmp_path):
    out = tmp_path / "sweep.csv"
    assert run_cli("sweep", "--rates", "20000", "--n-ffts", "128,64",
                   "--seeds", 1, "--train-count", 8, "--test-count", 4,
                   "--steps", 5, "--out", out, "--seed", 2) == 0
    lines = out.read_text().splitlines()
    comments = [l for l in lines if l.startswith("#")]
    rows = [l for l in lines if l and not l.startswith("#")]
    assert "# seed = 2" in comments
    assert rows[0].startswith("target_rate_hz,n_fft,hop,")
    assert len(rows) == 1 + 2  # header + one row per (rate, n_fft) cell


# ----------------------------------------------------------------- inspect


def test_inspect_wav_reports_energy_split(tmp_path, capsys):
    ds = simulate_small(tmp_path, count=1, seed=0, materials="metal")
    wav = ds / "wav/impulse_00000.wav"
    assert run_cli("inspect", wav, "--out", tmp_path / "spectra.csv") == 0
    stdout = capsys.readouterr().out
    assert "channels: 7, rate: 50000 Hz" in stdout
    assert "material: metal" in stdout
    assert "spectral energy below 20 kHz" in stdout
    header = [line for line in
              (tmp_path / "spectra.csv").read_text().splitlines()
              if not line.startswith("#")][0]
    assert header.split(",") == ["freq_hz"] + [f"ch{i}_mag" for i in range(7)]


def test_inspect_checkpoint_lists_tensors(tmp_path, capsys):
    ds = simulate_small(tmp_path, count=1, seed=1)
    out = tmp_path / "run"
    assert run_cli("train", "--manifest", ds / "manifest.jsonl", "--out", out,
                   "--seed", 0, "--steps", 4, "--batch-size", 2,
                   "--config", write_tiny_config(tmp_path)) == 0
    capsys.readouterr()
    assert run_cli("inspect", out / "seed0/final.ckpt") == 0
    stdout = capsys.readouterr().out
    assert "embed_dim=16" in stdout
    assert "head.w" in stdout
    assert "parameters:" in stdout


def test_inspect_unknown_format_is_data_error(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"not a known format")
    assert run_cli("inspect", path) == 3


# ----------------------------------------------------------- console script


def test_console_script_runs():
    proc = subprocess.run(["vibroloc", "--help"], capture_output=True,
                          text=True, timeout=120)
    assert proc.returncode == 0
    assert "simulate" in proc.stdout
    assert "inspect" in proc.stdout
