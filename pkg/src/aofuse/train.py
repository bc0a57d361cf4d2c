"""Losses, loss weighting schedule, Adam, and the reconstruction loop.

Per iteration: sample a batch of camera pixels and whole sonar beam columns
across poses, render both modalities, assemble

    L = w_son * L_son + w_cam * L_cam + lambda_eik * L_eik + lambda_reg * L_reg,

backpropagate exact adjoints into the grids, and take one Adam step. The
fused/camera/sonar modes share this single code path and differ only in
(w_son, w_cam), so fused runs with the schedule pinned at 1 (resp. 0) are
bit-identical to the sonar-only (resp. camera-only) modes.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import (
    BadConfigError,
    EmptyBatchError,
    LengthMismatchError,
    NonFiniteGradientError,
    ShapeMismatchError,
)
from .field import FieldModel, GradientBuffer, GridAdjoint, grid_backprop, grid_sample, locate
from .render import camera_backward, camera_forward_points, camera_sample_points, \
    sonar_backward, sonar_forward
from .rng import stream

MODES = ("fused", "camera", "sonar")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class ScheduleConfig:
    """Sonar-weight schedule alpha(t); camera weight is 1 - alpha(t)."""

    mode: str = "step"              # constant | linear | step
    alpha_start: float = 1.0
    alpha_end: float = 0.3
    e_t: int = 2000                 # step-mode switch iteration
    e_e: int = 5000                 # total iterations

    def __post_init__(self):
        if self.mode not in ("constant", "linear", "step"):
            raise BadConfigError(f"unknown schedule mode {self.mode!r}")
        if not (0.0 <= self.alpha_start <= 1.0 and 0.0 <= self.alpha_end <= 1.0):
            raise BadConfigError("alpha values must lie in [0, 1]")
        if self.e_t > self.e_e:
            raise BadConfigError("need e_t <= e_e")
        if self.e_e < 1:
            raise BadConfigError("need at least one iteration")


@dataclass
class LossConfig:
    lambda_eik: float = 0.1
    lambda_reg: float = 0.0
    schedule: ScheduleConfig = dc_field(default_factory=ScheduleConfig)

    def __post_init__(self):
        if self.lambda_eik < 0 or self.lambda_reg < 0:
            raise BadConfigError("loss weights must be >= 0")


@dataclass
class TrainOptions:
    """Everything reconstruct() needs besides the dataset itself."""

    loss: LossConfig = dc_field(default_factory=LossConfig)
    lr: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    camera_rays: int = 512
    sonar_beams: int = 8
    camera_samples: int = 64
    sonar_elevations: int = 24
    sonar_radial: int = 96
    eikonal_samples: int = 1024
    resolution: int = 64
    bbox_min: np.ndarray | None = None   # None: derived from manifest metadata
    bbox_max: np.ndarray | None = None
    bbox_extent: float = 1.4
    q_init: float = 20.0
    sphere_frac: float = 0.4
    jitter: bool = True
    snapshot_every: int = 100
    log_every: int = 0                   # 0: silent


# ---------------------------------------------------------------------------
# loss terms
# ---------------------------------------------------------------------------

def intensity_loss(pred, meas) -> float:
    """Mean absolute error over all entries (per-channel mean for RGB)."""
    pred = np.asarray(pred, dtype=float)
    meas = np.asarray(meas, dtype=float)
    if pred.shape != meas.shape:
        raise LengthMismatchError(f"{pred.shape} vs {meas.shape}")
    if pred.size == 0:
        raise LengthMismatchError("empty batch")
    return float(np.mean(np.abs(pred - meas)))


def eikonal_loss(spatial_grads) -> float:
    """Mean squared deviation of gradient norms from 1."""
    g = np.asarray(spatial_grads, dtype=float).reshape(-1, 3)
    if g.size == 0:
        raise EmptyBatchError("no gradient samples")
    return float(np.mean((np.linalg.norm(g, axis=1) - 1.0) ** 2))


def opacity_reg(alphas) -> float:
    """Mean opacity (alphas are already >= 0)."""
    a = np.asarray(alphas, dtype=float).reshape(-1)
    if a.size == 0:
        raise EmptyBatchError("no opacity samples")
    return float(np.mean(np.abs(a)))


def schedule_alpha(t: int, cfg: LossConfig) -> float:
    """Sonar weight at iteration t."""
    s = cfg.schedule
    if not 0 <= t <= s.e_e:
        raise BadConfigError(f"iteration {t} outside [0, {s.e_e}]")
    if s.mode == "constant":
        return s.alpha_start
    if s.mode == "step":
        return s.alpha_start if t < s.e_t else s.alpha_end
    return s.alpha_start + (s.alpha_end - s.alpha_start) * (t / s.e_e)


def mode_weights(mode: str, t: int, cfg: LossConfig) -> tuple[float, float]:
    """(w_son, w_cam); single-modality modes ignore the schedule."""
    if mode == "sonar":
        return 1.0, 0.0
    if mode == "camera":
        return 0.0, 1.0
    if mode != "fused":
        raise BadConfigError(f"unknown mode {mode!r}")
    a = schedule_alpha(t, cfg)
    return a, 1.0 - a


def total_loss(pred_sonar, meas_sonar, pred_camera, meas_camera, spatial_grads,
               alphas, t: int, cfg: LossConfig, mode: str = "fused"):
    """Weighted total loss and its per-term breakdown.

    Fused mode requires both modality batches; single-modality modes require
    their own batch and zero out the other term entirely.
    """
    w_son, w_cam = mode_weights(mode, t, cfg)
    has_son = pred_sonar is not None and np.asarray(pred_sonar).size > 0
    has_cam = pred_camera is not None and np.asarray(pred_camera).size > 0
    if mode == "fused" and not (has_son and has_cam):
        raise EmptyBatchError("fused mode needs both modality batches")
    if mode == "sonar" and not has_son or mode == "camera" and not has_cam:
        raise EmptyBatchError(f"{mode} mode got an empty {mode} batch")

    l_son = intensity_loss(pred_sonar, meas_sonar) if has_son else 0.0
    l_cam = intensity_loss(pred_camera, meas_camera) if has_cam else 0.0
    l_eik = eikonal_loss(spatial_grads) if cfg.lambda_eik > 0 else 0.0
    l_reg = opacity_reg(alphas) if cfg.lambda_reg > 0 else 0.0
    total = w_son * l_son + w_cam * l_cam + cfg.lambda_eik * l_eik + cfg.lambda_reg * l_reg
    breakdown = {
        "sonar": l_son, "camera": l_cam, "eikonal": l_eik, "reg": l_reg,
        "total": total, "w_son": w_son, "w_cam": w_cam,
    }
    return total, breakdown


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    lr: float
    beta1: float
    beta2: float
    eps: float
    step: int
    m: dict
    v: dict

    @classmethod
    def init(cls, params: dict, lr=1e-2, beta1=0.9, beta2=0.999, eps=1e-8) -> "AdamState":
        if lr <= 0:
            raise BadConfigError("lr must be positive")
        return cls(
            lr, beta1, beta2, eps, 0,
            {k: np.zeros_like(p) for k, p in params.items()},
            {k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(params: dict, grads: dict, state: AdamState) -> dict:
    """One bias-corrected Adam update, in place on the parameter arrays."""
    if set(params) != set(grads):
        raise ShapeMismatchError("parameter/gradient key mismatch")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for k, p in params.items():
        g = np.asarray(grads[k], dtype=float)
        if g.shape != np.shape(p):
            raise ShapeMismatchError(f"{k}: {g.shape} vs {np.shape(p)}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient in {k!r}")
        m = state.m[k]
        v = state.v[k]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p[...] = p - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params


# ---------------------------------------------------------------------------
# batches
# ---------------------------------------------------------------------------

@dataclass
class Batch:
    """One iteration's sampled rays, beams, and eikonal points."""

    cam_origins: np.ndarray      # (Bc, 3)
    cam_dirs: np.ndarray         # (Bc, 3)
    cam_meas: np.ndarray         # (Bc, 3)
    cam_jitter: np.ndarray | None
    son_rot: np.ndarray          # (Bs, 3, 3)
    son_trans: np.ndarray        # (Bs, 3)
    son_thetas: np.ndarray       # (Bs,)
    son_phis: np.ndarray         # (Bs, E)
    son_radii: np.ndarray        # (Bs, E, S)
    son_meas: np.ndarray         # (Bs, n_range_bins)
    eik_pts: np.ndarray          # (Ne, 3)


class DatasetArrays:
    """Dataset unpacked into stacked arrays for fast batch indexing."""

    def __init__(self, dataset: dict):
        self.camera = dataset["camera"]
        self.sonar = dataset["sonar"]
        self.cam_images = dataset["camera_images"]
        self.son_images = dataset["sonar_images"]
        self.cam_R = np.stack([p.R for p in dataset["camera_poses"]])
        self.cam_t = np.stack([p.t for p in dataset["camera_poses"]])
        self.son_R = np.stack([p.R for p in dataset["sonar_poses"]])
        self.son_t = np.stack([p.t for p in dataset["sonar_poses"]])
        self.n_poses = len(dataset["camera_poses"])
        self.manifest = dataset.get("manifest", {})


def draw_batch(data: DatasetArrays, field: FieldModel, opts: TrainOptions,
               seed: int, t: int) -> Batch:
    """Deterministic batch for iteration t: one RNG stream, fixed draw order."""
    rng = stream(seed, "iter", t)
    cam = data.camera
    son = data.sonar

    p_idx = rng.integers(data.n_poses, size=opts.camera_rays)
    us = rng.integers(cam.width, size=opts.camera_rays)
    vs = rng.integers(cam.height, size=opts.camera_rays)
    xm, ym = cam.pixel_to_metric(us, vs)
    d = np.stack([xm, ym, np.full_like(xm, cam.f)], axis=-1)
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    cam_dirs = np.einsum("bij,bj->bi", data.cam_R[p_idx], d)
    cam_origins = data.cam_t[p_idx]
    cam_meas = data.cam_images[p_idx, vs, us]

    s_idx = rng.integers(data.n_poses, size=opts.sonar_beams)
    a_idx = rng.integers(son.n_azimuth_bins, size=opts.sonar_beams)
    son_thetas = son.azimuth_centers()[a_idx]
    son_meas = data.son_images[s_idx, :, a_idx]

    e = opts.sonar_elevations
    s_r = opts.sonar_radial
    if opts.jitter:
        cam_jitter = rng.random((opts.camera_rays, opts.camera_samples))
        phi_u = rng.random((opts.sonar_beams, e))
        rad_u = rng.random((opts.sonar_beams, e, s_r))
    else:
        cam_jitter = None
        phi_u = np.full((opts.sonar_beams, e), 0.5)
        rad_u = np.full((opts.sonar_beams, e, s_r), 0.5)
    son_phis = son.phi_min + (np.arange(e) + phi_u) * ((son.phi_max - son.phi_min) / e)
    son_radii = son.r_min + (np.arange(s_r) + rad_u) * ((son.r_max - son.r_min) / s_r)

    eik_pts = field.bbox_min + rng.random((opts.eikonal_samples, 3)) * (
        field.bbox_max - field.bbox_min
    )
    return Batch(
        cam_origins, cam_dirs, cam_meas, cam_jitter,
        data.son_R[s_idx], data.son_t[s_idx], son_thetas, son_phis, son_radii,
        son_meas, eik_pts,
    )


# ---------------------------------------------------------------------------
# one optimization step (also the gradient-check entry point)
# ---------------------------------------------------------------------------

def loss_and_grad(field: FieldModel, data: DatasetArrays, batch: Batch, t: int,
                  cfg: LossConfig, mode: str, opts: TrainOptions,
                  buf: GradientBuffer | None = None):
    """Forward losses for one batch; adjoints accumulate into buf if given.

    Returns (total, breakdown). The same code path serves all three modes;
    zero-weight terms still render so modes differ only by loss weights.
    """
    w_son, w_cam = mode_weights(mode, t, cfg)

    cam_pts, cam_valid = camera_sample_points(
        field, batch.cam_origins, batch.cam_dirs, opts.camera_samples, batch.cam_jitter
    )
    cfwd = camera_forward_points(field, cam_pts, cam_valid)
    sfwd = sonar_forward(
        field, data.sonar, batch.son_rot, batch.son_trans,
        batch.son_thetas, batch.son_phis, batch.son_radii,
    )

    eik_ctx = locate(field, batch.eik_pts)
    eik_gs = grid_sample(field, batch.eik_pts, ctx=eik_ctx,
                         want_acoustic=False, want_optical=False)
    grads_all = np.concatenate(
        [
            cfwd.cache.grad[cam_valid].reshape(-1, 3),
            sfwd.cache.grad.reshape(-1, 3),
            eik_gs.grad,
        ]
    )
    alphas_all = np.concatenate(
        [cfwd.cache.alpha[cam_valid].reshape(-1), sfwd.cache.alpha.reshape(-1)]
    )

    total, breakdown = total_loss(
        sfwd.bins, batch.son_meas, cfwd.pixel, batch.cam_meas,
        grads_all, alphas_all, t, cfg, mode,
    )
    # report these terms even when their weights are zero
    breakdown["eikonal"] = eikonal_loss(grads_all)
    breakdown["reg"] = opacity_reg(alphas_all) if alphas_all.size else 0.0

    if buf is None:
        return total, breakdown

    n_alpha = alphas_all.size
    d_alpha_reg = cfg.lambda_reg / n_alpha if (cfg.lambda_reg > 0 and n_alpha) else 0.0

    d_grad_cam = d_grad_son = None
    if cfg.lambda_eik > 0:
        n_x = grads_all.shape[0]

        def eik_adjoint(g):
            norm = np.sqrt(np.einsum("...a,...a->...", g, g))[..., None]
            safe = np.maximum(norm, 1e-300)
            return (cfg.lambda_eik * 2.0 / n_x) * (norm - 1.0) * (g / safe)

        d_grad_cam = eik_adjoint(cfwd.cache.grad) * cam_valid[:, None, None]
        d_grad_son = eik_adjoint(sfwd.cache.grad)
        grid_backprop(field, batch.eik_pts,
                      GridAdjoint(d_grad=eik_adjoint(eik_gs.grad)), buf, ctx=eik_ctx)

    d_pixel = w_cam * np.sign(cfwd.pixel - batch.cam_meas) / batch.cam_meas.size
    extra_cam = None
    if d_alpha_reg:
        extra_cam = np.where(cam_valid[:, None], d_alpha_reg, 0.0) * np.ones_like(
            cfwd.cache.alpha
        )
    camera_backward(field, cfwd, d_pixel, buf, d_alpha_extra=extra_cam, d_grad=d_grad_cam)

    d_bins = w_son * np.sign(sfwd.bins - batch.son_meas) / batch.son_meas.size
    extra_son = np.full_like(sfwd.cache.alpha, d_alpha_reg) if d_alpha_reg else None
    sonar_backward(field, sfwd, d_bins, buf, d_alpha_extra=extra_son, d_grad=d_grad_son)
    return total, breakdown


# ---------------------------------------------------------------------------
# the reconstruction loop
# ---------------------------------------------------------------------------

@dataclass
class TrainReport:
    iterations: np.ndarray
    loss_sonar: np.ndarray
    loss_camera: np.ndarray
    loss_eikonal: np.ndarray
    loss_reg: np.ndarray
    loss_total: np.ndarray
    alpha: np.ndarray
    q: np.ndarray
    wall_time: np.ndarray
    diverged_at: int = -1

    def rows(self):
        for i in range(self.iterations.size):
            yield (
                int(self.iterations[i]),
                self.loss_sonar[i], self.loss_camera[i], self.loss_eikonal[i],
                self.loss_reg[i], self.loss_total[i], self.alpha[i], self.q[i],
                self.wall_time[i],
            )

    HEADER = ["iteration", "loss_sonar", "loss_camera", "loss_eikonal",
              "loss_reg", "loss_total", "alpha", "q", "wall_time"]

    def to_csv(self, path):
        from .io import write_csv

        write_csv(path, self.HEADER, self.rows())


def default_bbox(data: DatasetArrays, opts: TrainOptions):
    """Cubic region of interest from manifest metadata only: centered between
    the trajectory endpoints at the recorded standoff distance."""
    baseline = data.manifest.get("baseline", 0.0)
    standoff = data.manifest.get("standoff", 1.5)
    center = np.array([baseline / 2.0, 0.0, standoff])
    half = opts.bbox_extent / 2.0
    return center - half, center + half


def reconstruct(dataset: dict, mode: str, opts: TrainOptions, seed: int,
                progress=False) -> tuple[FieldModel, TrainReport]:
    """Run the full optimization; deterministic given (dataset, mode, seed).

    Aborts on a non-finite loss or gradient and returns the last snapshot
    (divergence guard); TrainReport.diverged_at records the iteration.
    """
    if mode not in MODES:
        raise BadConfigError(f"mode must be one of {MODES}")
    data = dataset if isinstance(dataset, DatasetArrays) else DatasetArrays(dataset)
    cfg = opts.loss
    if opts.bbox_min is not None and opts.bbox_max is not None:
        lo, hi = np.asarray(opts.bbox_min, float), np.asarray(opts.bbox_max, float)
    else:
        lo, hi = default_bbox(data, opts)
    field = FieldModel.initialize(
        lo, hi, opts.resolution, sphere_frac=opts.sphere_frac, q_init=opts.q_init
    )

    log_q_arr = np.array(field.log_q)
    params = {
        "sdf": field.sdf, "acoustic": field.acoustic,
        "optical": field.optical, "log_q": log_q_arr,
    }
    state = AdamState.init(params, lr=opts.lr, beta1=opts.beta1,
                           beta2=opts.beta2, eps=opts.eps)
    buf = GradientBuffer.zeros_like(field)

    n_iter = cfg.schedule.e_e
    rec = {k: np.zeros(n_iter) for k in
           ("son", "cam", "eik", "reg", "tot", "alpha", "q", "wall")}
    snapshot = field.copy()
    diverged_at = -1

    for t in range(n_iter):
        t0 = time.perf_counter()
        batch = draw_batch(data, field, opts, seed, t)
        buf.zero()
        total, br = loss_and_grad(field, data, batch, t, cfg, mode, opts, buf)

        if not np.isfinite(total):
            diverged_at = t
            field = snapshot
            break
        try:
            grads = {"sdf": buf.d_sdf, "acoustic": buf.d_acoustic,
                     "optical": buf.d_optical, "log_q": np.asarray(buf.d_log_q)}
            adam_step(params, grads, state)
        except NonFiniteGradientError:
            diverged_at = t
            field = snapshot
            break
        np.maximum(field.acoustic, 0.0, out=field.acoustic)
        np.clip(field.optical, 0.0, 1.0, out=field.optical)
        field.log_q = float(log_q_arr)

        rec["son"][t] = br["sonar"]
        rec["cam"][t] = br["camera"]
        rec["eik"][t] = br["eikonal"]
        rec["reg"][t] = br["reg"]
        rec["tot"][t] = total
        rec["alpha"][t] = br["w_son"] if mode == "fused" else (1.0 if mode == "sonar" else 0.0)
        rec["q"][t] = field.q
        rec["wall"][t] = time.perf_counter() - t0

        if opts.snapshot_every and (t + 1) % opts.snapshot_every == 0:
            snapshot = field.copy()
        if progress and opts.log_every and (t + 1) % opts.log_every == 0:
            print(
                f"iter {t + 1}/{n_iter} total {total:.5f} son {br['sonar']:.5f} "
                f"cam {br['camera']:.5f} q {field.q:.1f}",
                file=sys.stderr,
            )

    done = n_iter if diverged_at < 0 else diverged_at
    report = TrainReport(
        np.arange(done), rec["son"][:done], rec["cam"][:done], rec["eik"][:done],
        rec["reg"][:done], rec["tot"][:done], rec["alpha"][:done], rec["q"][:done],
        rec["wall"][:done], diverged_at,
    )
    return field, report
