"""CLI contract: subcommands, exit codes, stderr-only progress, outputs."""

import json
from pathlib import Path

import numpy as np
import pytest

from aofuse import io as aio
from aofuse.cli import dispatch

FAST_CONFIG = {
    "scene": {"primitives": [{"shape": "sphere", "center": [0.1, 0.0, 1.75],
                              "radius": 0.3}]},
    "camera": {"f": 0.1, "width": 32, "height": 24, "pixel_pitch": 2.2e-3},
    "sonar": {"r_min": 1.2, "r_max": 2.2, "n_range_bins": 24,
              "azimuth_fov": 0.7, "n_azimuth_bins": 16, "e_e": 5.0},
    "trajectory": {"baseline": 0.2, "n_poses": 3, "standoff": 1.75},
    "simulation": {"n_phi": 64},
    "loss": {"schedule": {"e_t": 4, "e_e": 8}},
    "sampling": {"camera_rays": 32, "sonar_beams": 2, "camera_samples": 16,
                 "sonar_elevations": 4, "sonar_radial": 24, "eikonal_samples": 32},
    "field": {"resolution": 12},
}


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    cfg = d / "config.json"
    cfg.write_text(json.dumps(FAST_CONFIG))
    return d


def test_conditioning_smoke(workdir, capsys):
    out = workdir / "cond"
    assert dispatch(["conditioning", "--samples", "100", "--seed", "1",
                     "--out", str(out)]) == 0
    captured = capsys.readouterr()
    assert captured.out == ""  # progress only on stderr
    assert "median" in captured.err
    assert (out / "kappa_histogram.csv").exists()
    assert (out / "kappa_medians.csv").exists()


def test_unknown_subcommand_exits_2(capsys):
    assert dispatch(["frobnicate"]) == 2


def test_missing_required_arg_exits_2():
    assert dispatch(["simulate", "--config", "x.json"]) == 2  # no --out


def test_reconstruct_missing_dataset_exits_1(workdir, capsys):
    rc = dispatch(["reconstruct", "--dataset", str(workdir / "nope"),
                   "--config", str(workdir / "config.json"),
                   "--out", str(workdir / "r")])
    assert rc == 1
    assert "BadDataset" in capsys.readouterr().err


def test_missing_config_exits_2(workdir, capsys):
    rc = dispatch(["simulate", "--config", str(workdir / "missing.json"),
                   "--out", str(workdir / "d")])
    assert rc == 2


def test_invalid_config_lists_all_violations(workdir, capsys):
    bad = workdir / "bad.json"
    bad.write_text('{"trajectory": {"baseline": -1}, "optimizer": {"lr": 0}}')
    rc = dispatch(["simulate", "--config", str(bad), "--out", str(workdir / "d")])
    assert rc == 2
    err = capsys.readouterr().err
    assert "/trajectory/baseline" in err and "/optimizer/lr" in err


def test_full_pipeline_and_determinism(workdir):
    cfg = str(workdir / "config.json")
    ds = workdir / "data"
    assert dispatch(["--threads", "1", "simulate", "--config", cfg, "--out", str(ds)]) == 0
    assert (ds / "manifest.json").exists()

    for tag in ("r1", "r2"):
        rc = dispatch(["reconstruct", "--dataset", str(ds), "--mode", "fused",
                       "--config", cfg, "--seed", "3", "--out", str(workdir / tag)])
        assert rc == 0
    b1 = (workdir / "r1" / "checkpoint.bin").read_bytes()
    b2 = (workdir / "r2" / "checkpoint.bin").read_bytes()
    assert b1 == b2
    # train reports match except the informational wall_time column
    h1, rows1 = aio.read_csv(workdir / "r1" / "train_report.csv")
    h2, rows2 = aio.read_csv(workdir / "r2" / "train_report.csv")
    drop = h1.index("wall_time")
    strip = lambda rows: [[c for i, c in enumerate(r) if i != drop] for r in rows]
    assert h1 == h2 and strip(rows1) == strip(rows2)

    # render predicted images at dataset poses
    assert dispatch(["render", "--checkpoint", str(workdir / "r1" / "checkpoint.bin"),
                     "--dataset", str(ds), "--out", str(workdir / "pred")]) == 0
    assert (workdir / "pred" / "cam" / "0000.ppm").exists()
    assert (workdir / "pred" / "son" / "0002.pfm").exists()

    # evaluate against the analytic scene
    metrics = workdir / "metrics.csv"
    rc = dispatch(["evaluate", "--checkpoint", str(workdir / "r1" / "checkpoint.bin"),
                   "--scene", cfg, "--tau", "0.05", "--out", str(metrics),
                   "--samples", "2000", "--mode", "fused", "--seed", "3"])
    assert rc == 0
    header, rows = aio.read_csv(metrics)
    assert header == ["dataset", "mode", "seed", "tau", "chamfer_l1",
                      "precision", "recall"]
    assert len(rows) == 1 and rows[0][1] == "fused"
    assert metrics.with_suffix(".ply").exists()
    assert metrics.with_suffix(".per_axis.csv").exists()


def test_evaluate_determinism(workdir):
    cfg = str(workdir / "config.json")
    ck = str(workdir / "r1" / "checkpoint.bin")
    a = workdir / "ma.csv"
    b = workdir / "mb.csv"
    for out in (a, b):
        assert dispatch(["evaluate", "--checkpoint", ck, "--scene", cfg,
                         "--out", str(out), "--samples", "1500", "--seed", "7"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_sweep_expansion_without_run(workdir):
    cfg = str(workdir / "config.json")
    out = workdir / "sweep"
    assert dispatch(["sweep", "--config", cfg, "--kind", "baseline",
                     "--out", str(out)]) == 0
    dirs = sorted(p.name for p in out.iterdir() if p.is_dir())
    assert dirs == ["baseline_0.24", "baseline_0.48", "baseline_0.72",
                    "baseline_0.96", "baseline_1.20"]
    doc = json.loads((out / "baseline_0.24" / "config.json").read_text())
    assert doc["trajectory"]["baseline"] == pytest.approx(0.24)
    # poses sub-sample proportionally with the baseline
    assert doc["trajectory"]["n_poses"] == max(2, round(3 * 0.24 / 0.2))

    out2 = workdir / "sweep_sigma"
    assert dispatch(["sweep", "--config", cfg, "--kind", "specularity",
                     "--out", str(out2)]) == 0
    doc = json.loads((out2 / "sigma_0.5" / "config.json").read_text())
    assert doc["scene"]["material"]["c_dl"] == 0.0
    assert doc["scene"]["material"]["c_sl"] == 1.0
    assert doc["scene"]["material"]["sigma_alpha"] == 0.5


def test_no_writes_outside_out_dir(workdir, tmp_path, monkeypatch):
    # run a command from a scratch cwd and verify it stays clean
    cfg = str(workdir / "config.json")
    scratch = tmp_path / "cwd"
    scratch.mkdir()
    monkeypatch.chdir(scratch)
    out = tmp_path / "cond_out"
    assert dispatch(["conditioning", "--samples", "50", "--seed", "0",
                     "--out", str(out)]) == 0
    assert list(scratch.iterdir()) == []
