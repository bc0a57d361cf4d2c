"""Command-line entry point: simulate -> reconstruct -> evaluate, plus the
conditioning study and the experiment sweeps.

Exit codes: 0 success, 2 configuration/usage error, 1 runtime error.
Progress goes to stderr; machine-readable output only lands in files under
the requested --out locations.
"""

from __future__ import annotations

import argparse
import copy
import os
import sys
from pathlib import Path

import numpy as np

from . import io as aio
from .analyze import (
    chamfer_precision_recall,
    marching_cubes,
    monte_carlo_conditioning,
    per_axis_errors,
    write_conditioning_reports,
    write_per_axis_csv,
)
from .analyze import ConditioningDistributions
from .config import ConfigError, load_config, validate_config
from .errors import AofuseError, BadConfigError, BadDatasetError
from .render import render_camera_image, render_sonar_image
from .simulate import generate_dataset
from .train import reconstruct

BASELINE_SWEEP = (1.2, 0.96, 0.72, 0.48, 0.24)
SIGMA_SWEEP = (1.0, 0.5, 0.1)


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("AOFUSE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise BadConfigError(f"AOFUSE_THREADS={env!r} is not an integer") from exc
    return os.cpu_count() or 1


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="aofuse",
        description="acoustic-optical surface reconstruction toolkit",
    )
    ap.add_argument("--threads", type=int, default=None,
                    help="worker threads (default: all cores, or AOFUSE_THREADS)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="render a ground-truth dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("reconstruct", help="optimize a field against a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--mode", choices=("fused", "camera", "sonar"), default="fused")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", required=True)

    p = sub.add_parser("render", help="re-render a checkpoint at dataset poses")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="mesh a checkpoint and score it")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--scene", required=True, help="config file providing the scene")
    p.add_argument("--tau", type=float, default=0.05)
    p.add_argument("--out", required=True, help="metrics CSV path")
    p.add_argument("--samples", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dataset-label", default="")
    p.add_argument("--mode", default="")

    p = sub.add_parser("conditioning", help="two-view conditioning Monte Carlo")
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--unit", choices=("m", "cm", "mm"), default="cm",
                   help="working length unit of the stacked system")

    p = sub.add_parser("sweep", help="expand (and optionally run) experiment grids")
    p.add_argument("--config", required=True)
    p.add_argument("--kind", choices=("baseline", "specularity"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--run", action="store_true")
    p.add_argument("--mode", choices=("fused", "camera", "sonar"), default="fused")
    p.add_argument("--seed", type=int, default=None)

    return ap


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    job = cfg.simulation_job()
    _log(f"simulating {len(job.trajectory)} poses -> {args.out}")
    generate_dataset(job, args.out, threads=_threads(args), progress=True)
    return 0


def _cmd_reconstruct(args) -> int:
    cfg = load_config(args.config)
    dataset = aio.load_dataset(args.dataset)
    seed = cfg.seed if args.seed is None else args.seed
    opts = cfg.train_options()
    opts.log_every = 500
    _log(f"reconstructing mode={args.mode} seed={seed}")
    field, report = reconstruct(dataset, args.mode, opts, seed, progress=True)
    out = aio.ensure_dir(args.out)
    aio.save_checkpoint(out / "checkpoint.bin", field)
    report.to_csv(out / "train_report.csv")
    if report.diverged_at >= 0:
        _log(f"warning: diverged at iteration {report.diverged_at}; "
             "kept the last good checkpoint")
    return 0


def _cmd_render(args) -> int:
    field = aio.load_checkpoint(args.checkpoint)
    dataset = aio.load_dataset(args.dataset)
    out = aio.ensure_dir(args.out)
    aio.ensure_dir(out / "cam")
    aio.ensure_dir(out / "son")
    cam = dataset["camera"]
    son = dataset["sonar"]
    for i, (cp, sp) in enumerate(zip(dataset["camera_poses"], dataset["sonar_poses"])):
        rgb = np.clip(render_camera_image(field, cam, cp), 0.0, 1.0)
        aio.write_ppm16(out / f"cam/{i:04d}.ppm", rgb)
        aio.write_pfm(out / f"son/{i:04d}.pfm", render_sonar_image(field, son, sp))
        _log(f"rendered pose {i + 1}/{len(dataset['camera_poses'])}")
    return 0


def _cmd_evaluate(args) -> int:
    field = aio.load_checkpoint(args.checkpoint)
    scene = load_config(args.scene).scene()
    mesh = marching_cubes(field)
    mesh.save_ply(Path(args.out).with_suffix(".ply"))
    metrics = chamfer_precision_recall(
        mesh, scene, tau=args.tau, n_samples=args.samples, seed=args.seed
    )
    edges, counts = per_axis_errors(mesh, scene, n_samples=args.samples, seed=args.seed)
    write_per_axis_csv(Path(args.out).with_suffix(".per_axis.csv"), edges, counts)
    aio.write_csv(
        args.out,
        ["dataset", "mode", "seed", "tau", "chamfer_l1", "precision", "recall"],
        [(args.dataset_label, args.mode, args.seed, args.tau,
          metrics.chamfer_l1, metrics.precision, metrics.recall)],
    )
    _log(f"chamfer_l1={metrics.chamfer_l1:.4f} precision={metrics.precision:.3f} "
         f"recall={metrics.recall:.3f}")
    return 0


def _cmd_conditioning(args) -> int:
    scale = {"m": 1.0, "cm": 100.0, "mm": 1000.0}[args.unit]
    dist = ConditioningDistributions(length_scale=scale)
    result = monte_carlo_conditioning(args.samples, args.seed, dist)
    write_conditioning_reports(result, args.out)
    for w in ("cam", "son", "multi"):
        _log(f"median kappa_{w} = {result.median(w):.2f}")
    return 0


def _expand_sweep(cfg_doc: dict, kind: str):
    """Yield (name, config document) pairs for one experiment grid."""
    if kind == "baseline":
        base = cfg_doc["trajectory"]["baseline"]
        n = cfg_doc["trajectory"]["n_poses"]
        for b in BASELINE_SWEEP:
            doc = copy.deepcopy(cfg_doc)
            doc["trajectory"]["baseline"] = b
            doc["trajectory"]["n_poses"] = max(2, round(n * b / base))
            yield f"baseline_{b:.2f}", doc
    else:
        for sigma in SIGMA_SWEEP:
            doc = copy.deepcopy(cfg_doc)
            doc["scene"]["material"]["c_dl"] = 0.0
            doc["scene"]["material"]["c_sl"] = 1.0
            doc["scene"]["material"]["sigma_alpha"] = sigma
            yield f"sigma_{sigma:.1f}", doc


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    out = aio.ensure_dir(args.out)
    rows = []
    for name, doc in _expand_sweep(cfg.raw, args.kind):
        run_dir = aio.ensure_dir(out / name)
        aio.write_json(run_dir / "config.json", doc)
        _log(f"expanded {name}")
        if not args.run:
            continue
        rc = validate_config(doc)
        seed = rc.seed if args.seed is None else args.seed
        generate_dataset(rc.simulation_job(), run_dir / "data", threads=_threads(args))
        dataset = aio.load_dataset(run_dir / "data")
        opts = rc.train_options()
        field, report = reconstruct(dataset, args.mode, opts, seed)
        aio.save_checkpoint(run_dir / "checkpoint.bin", field)
        report.to_csv(run_dir / "train_report.csv")
        mesh = marching_cubes(field)
        mesh.save_ply(run_dir / "mesh.ply")
        metrics = chamfer_precision_recall(mesh, rc.scene(), seed=seed)
        rows.append((name, args.mode, seed, metrics.tau,
                     metrics.chamfer_l1, metrics.precision, metrics.recall))
        _log(f"{name}: chamfer={metrics.chamfer_l1:.4f}")
    if rows:
        aio.write_csv(out / "summary.csv",
                      ["dataset", "mode", "seed", "tau", "chamfer_l1", "precision", "recall"],
                      rows)
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "reconstruct": _cmd_reconstruct,
    "render": _cmd_render,
    "evaluate": _cmd_evaluate,
    "conditioning": _cmd_conditioning,
    "sweep": _cmd_sweep,
}


def dispatch(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, BadConfigError) as exc:
        if isinstance(exc, ConfigError):
            for v in exc.violations:
                _log(f"config error at {v.path}: {v.message}")
        else:
            _log(f"config error: {exc}")
        return 2
    except (AofuseError, OSError, ValueError) as exc:
        _log(f"error: {type(exc).__name__}: {exc}")
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
