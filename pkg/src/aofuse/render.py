"""Differentiable volumetric renderers for both modalities.

A camera pixel composites albedo along its optical ray; a sonar range bin
composites (1/r)-attenuated acoustic albedo along radial beams, summed over
stratified elevations. Opacity comes from consecutive SDF samples through a
sigmoid of trainable sharpness q:

    alpha_s = max((S(q n_s) - S(q n_{s+1})) / S(q n_s), 0),  S = sigmoid
    T_s     = prod_{r<s} (1 - alpha_r)

The sonar production path marches each (theta, phi) beam once and scatters
in-bin weights to every range bin of the column (column marching); the
per-bin path exists as a slow oracle. Backward passes accumulate exact
adjoints w.r.t. the SDF grid, both albedo grids, and log q by reversing the
prefix-product structure; sigmoid ratios are evaluated in log space so
sharp fields cannot underflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import FieldModel, GradientBuffer, GridAdjoint, grid_backprop, grid_sample, locate
from .sensors import Pose, SonarModel, camera_rays, spherical_to_cartesian


def _log_sigmoid(x: np.ndarray) -> np.ndarray:
    return -np.logaddexp(0.0, -x)


def discrete_opacity(sdf_s, sdf_next, q: float) -> np.ndarray:
    """Opacity of the interval between two consecutive SDF samples."""
    if q <= 0:
        raise ValueError("q must be positive")
    a = _log_sigmoid(q * np.asarray(sdf_s, dtype=float))
    b = _log_sigmoid(q * np.asarray(sdf_next, dtype=float))
    # ratio > 1 is clamped to alpha = 0 anyway; capping the exponent at 0
    # avoids a spurious overflow for strongly exiting intervals
    return np.maximum(1.0 - np.exp(np.minimum(b - a, 0.0)), 0.0)


def transmittance(alphas) -> np.ndarray:
    """Prefix survival products along the last axis: T_s = prod_{r<s}(1-a_r)."""
    a = np.asarray(alphas, dtype=float)
    t = np.ones_like(a)
    if a.shape[-1] > 1:
        t[..., 1:] = np.cumprod(1.0 - a[..., :-1], axis=-1)
    return t


def ray_bbox_intersect(origins, dirs, lo, hi) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Slab test; returns (t_enter, t_exit, hit) with t_enter clamped >= 0."""
    origins = np.atleast_2d(origins)
    dirs = np.atleast_2d(dirs)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        t_lo = (lo - origins) * inv
        t_hi = (hi - origins) * inv
    # parallel rays: +-inf propagates correctly through min/max
    t0 = np.nanmax(np.minimum(t_lo, t_hi), axis=1)
    t1 = np.nanmin(np.maximum(t_lo, t_hi), axis=1)
    t0 = np.maximum(t0, 0.0)
    hit = t1 > t0
    return t0, t1, hit


@dataclass
class MarchCache:
    """Everything the backward pass needs from one forward march.

    Sample axis is last; alpha/T live on the first K-1 samples.
    """

    pts: np.ndarray          # (..., S, 3)
    sdf: np.ndarray          # (..., S)
    grad: np.ndarray         # (..., S, 3)
    log_phi: np.ndarray      # (..., S)
    alpha: np.ndarray        # (..., S-1)
    trans: np.ndarray        # (..., S-1)
    valid: np.ndarray        # (...,) rays that actually sample the field
    ctx: object = None       # GridContext of the flattened points


def _march(field: FieldModel, pts: np.ndarray, valid=None,
           want_acoustic=False, want_optical=False):
    """Shared forward: sample field along points, build alpha and T."""
    shape = pts.shape[:-1]
    ctx = locate(field, pts.reshape(-1, 3))
    gs = grid_sample(field, pts.reshape(-1, 3), ctx=ctx,
                     want_acoustic=want_acoustic, want_optical=want_optical)
    sdf = gs.sdf.reshape(shape)
    grad = gs.grad.reshape(shape + (3,))
    q = field.q
    log_phi = _log_sigmoid(q * sdf)
    ratio = np.exp(np.minimum(log_phi[..., 1:] - log_phi[..., :-1], 0.0))
    alpha = np.maximum(1.0 - ratio, 0.0)
    if valid is None:
        valid = np.ones(shape[:-1], dtype=bool)
    alpha = alpha * valid[..., None]
    trans = transmittance(alpha)
    cache = MarchCache(pts, sdf, grad, log_phi, alpha, trans, valid, ctx)
    acoustic = gs.acoustic.reshape(shape) if want_acoustic else None
    optical = gs.optical.reshape(shape + (3,)) if want_optical else None
    return cache, acoustic, optical


def _composite_backward(v, alpha, trans, d_alpha_extra=None) -> np.ndarray:
    """Adjoint of L = sum_i v_i T_i alpha_i w.r.t. alpha, by reverse scan.

    Division-free: the T recurrence T_{i+1} = T_i (1 - alpha_i) is reversed
    directly, so fully opaque samples stay well-defined.
    """
    k = alpha.shape[-1]
    d_alpha = np.empty_like(alpha)
    running = np.zeros(alpha.shape[:-1])
    for i in range(k - 1, -1, -1):
        d_alpha[..., i] = (v[..., i] - running) * trans[..., i]
        running = v[..., i] * alpha[..., i] + running * (1.0 - alpha[..., i])
    if d_alpha_extra is not None:
        d_alpha = d_alpha + d_alpha_extra
    return d_alpha


def _alpha_to_field_adjoints(cache: MarchCache, q: float, d_alpha: np.ndarray):
    """Chain d(alpha) back to d(sdf) per sample and the scalar d(log q)."""
    # clamping matches the forward: clamped intervals have zero gradient and
    # the exp can no longer overflow into a 0 * inf
    ratio = np.exp(np.minimum(cache.log_phi[..., 1:] - cache.log_phi[..., :-1], 0.0))
    live = (1.0 - ratio > 0.0) & cache.valid[..., None]
    dz = np.where(live, d_alpha, 0.0)
    phi = np.exp(cache.log_phi)
    t = dz * ratio
    d_qs = np.zeros_like(cache.sdf)
    d_qs[..., :-1] += t * (1.0 - phi[..., :-1])
    d_qs[..., 1:] -= t * (1.0 - phi[..., 1:])
    d_sdf = q * d_qs
    d_log_q = q * float((d_qs * cache.sdf).sum())
    return d_sdf, d_log_q


# ---------------------------------------------------------------------------
# camera
# ---------------------------------------------------------------------------

@dataclass
class CameraForward:
    cache: MarchCache
    albedo: np.ndarray       # (..., S-1, 3), taken at the alpha anchor samples
    pixel: np.ndarray        # (..., 3)


def camera_forward_points(field: FieldModel, pts: np.ndarray, valid=None) -> CameraForward:
    """Composite optical albedo along pre-built sample points (..., S, 3)."""
    cache, _, optical = _march(field, pts, valid, want_optical=True)
    albedo = optical[..., :-1, :]
    w = cache.trans * cache.alpha
    pixel = (w[..., None] * albedo).sum(axis=-2)
    return CameraForward(cache, albedo, pixel)


def camera_sample_points(field, origins, dirs, n_samples: int, jitter=None):
    """Stratified sample points inside the field bbox for a ray batch.

    Returns (pts (B, S, 3), valid (B,)); rays missing the bbox get
    degenerate all-origin points and are flagged invalid.
    """
    origins = np.atleast_2d(np.asarray(origins, dtype=float))
    dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
    t0, t1, hit = ray_bbox_intersect(origins, dirs, field.bbox_min, field.bbox_max)
    span = np.where(hit, t1 - t0, 0.0)
    u = np.full((origins.shape[0], n_samples), 0.5) if jitter is None else jitter
    t = t0[:, None] + (np.arange(n_samples) + u) * (span[:, None] / n_samples)
    pts = origins[:, None, :] + t[:, :, None] * dirs[:, None, :]
    return pts, hit


def render_camera_pixel(field: FieldModel, ray, n_samples: int, near: float, far: float,
                        jitter=None) -> np.ndarray:
    """RGB for a single ray with stratified samples on [near, far]."""
    if not near < far:
        raise ValueError("need near < far")
    if n_samples < 2:
        raise ValueError("need at least 2 samples")
    origin, direction = ray
    u = np.full(n_samples, 0.5) if jitter is None else np.asarray(jitter, dtype=float)
    t = near + (np.arange(n_samples) + u) * ((far - near) / n_samples)
    pts = np.asarray(origin, dtype=float)[None, :] + t[:, None] * np.asarray(direction, float)
    return camera_forward_points(field, pts[None]).pixel[0]


def camera_backward(field: FieldModel, fwd: CameraForward, d_pixel: np.ndarray,
                    buf: GradientBuffer, d_alpha_extra=None, d_grad=None) -> None:
    """Accumulate d(loss)/d(params) given per-pixel adjoints d_pixel (..., 3).

    d_grad (..., S, 3), when given, carries the spatial-gradient adjoint of
    the same sample points (the eikonal term) so the scatter happens once.
    """
    cache = fwd.cache
    w = cache.trans * cache.alpha
    v = (d_pixel[..., None, :] * fwd.albedo).sum(axis=-1)
    d_albedo = d_pixel[..., None, :] * w[..., None]
    d_alpha = _composite_backward(v, cache.alpha, cache.trans, d_alpha_extra)
    d_sdf, d_log_q = _alpha_to_field_adjoints(cache, field.q, d_alpha)
    d_optical = np.zeros(cache.sdf.shape + (3,))
    d_optical[..., :-1, :] = d_albedo
    valid = cache.valid[..., None]
    grid_backprop(
        field,
        cache.pts.reshape(-1, 3),
        GridAdjoint(
            d_sdf=(d_sdf * valid).reshape(-1),
            d_grad=None if d_grad is None else d_grad.reshape(-1, 3),
            d_optical=(d_optical * valid[..., None]).reshape(-1, 3),
        ),
        buf,
        ctx=cache.ctx,
    )
    buf.d_log_q += d_log_q


# ---------------------------------------------------------------------------
# sonar
# ---------------------------------------------------------------------------

@dataclass
class SonarForward:
    cache: MarchCache
    acoustic: np.ndarray     # (B, E, S)
    radii: np.ndarray        # (B, E, S)
    bin_idx: np.ndarray      # (B, E, S) range bin of each sample
    unit: np.ndarray         # (B, E, S-1): E_e * dphi / r at anchor samples
    bins: np.ndarray         # (B, n_bins)
    n_bins: int


def sonar_radii(sonar: SonarModel, n_radial: int, jitter=None) -> np.ndarray:
    """Stratified radial sample positions spanning [r_min, r_max]."""
    u = np.full(n_radial, 0.5) if jitter is None else jitter
    step = (sonar.r_max - sonar.r_min) / n_radial
    return sonar.r_min + (np.arange(n_radial) + u) * step


def sonar_forward(field: FieldModel, sonar: SonarModel, rot: np.ndarray, trans: np.ndarray,
                  thetas: np.ndarray, phis: np.ndarray, radii: np.ndarray) -> SonarForward:
    """Column-march a batch of beams and scatter weights into range bins.

    rot (B,3,3), trans (B,3): world-from-sonar poses per beam; thetas (B,),
    phis (B,E), radii (B,E,S). One radial march serves every range bin of a
    beam; per-sample weights (1/r) T alpha albedo are summed into the bin
    holding the sample, then scaled by E_e * dphi and summed over elevations.
    """
    b, e = phis.shape
    s = radii.shape[-1]
    dirs = spherical_to_cartesian(np.ones((b, e)), thetas[:, None], phis)   # (B,E,3)
    dirs_world = np.einsum("bij,bej->bei", rot, dirs)
    pts = trans[:, None, None, :] + radii[..., None] * dirs_world[:, :, None, :]
    cache, acoustic, _ = _march(field, pts, want_acoustic=True)

    dphi = (sonar.phi_max - sonar.phi_min) / e
    w = cache.trans * cache.alpha                                           # (B,E,S-1)
    unit = sonar.e_e * dphi / radii[..., :-1]
    contrib = w * unit * acoustic[..., :-1]

    bin_idx = sonar.range_bin_of(radii.reshape(-1)).reshape(radii.shape)
    anchor_bins = bin_idx[..., :-1]
    beam_of = np.broadcast_to(np.arange(b)[:, None, None], anchor_bins.shape)
    keep = anchor_bins >= 0
    flat = beam_of[keep] * sonar.n_range_bins + anchor_bins[keep]
    bins = np.bincount(flat, weights=contrib[keep], minlength=b * sonar.n_range_bins)
    return SonarForward(cache, acoustic, radii, bin_idx, unit,
                        bins.reshape(b, sonar.n_range_bins), sonar.n_range_bins)


def sonar_backward(field: FieldModel, fwd: SonarForward, d_bins: np.ndarray,
                   buf: GradientBuffer, d_alpha_extra=None, d_grad=None) -> None:
    """Accumulate adjoints given per-(beam, bin) intensity adjoints."""
    cache = fwd.cache
    anchor_bins = fwd.bin_idx[..., :-1]
    beam_of = np.broadcast_to(
        np.arange(d_bins.shape[0])[:, None, None], anchor_bins.shape
    )
    up = np.where(
        anchor_bins >= 0,
        d_bins.reshape(-1)[beam_of * fwd.n_bins + np.maximum(anchor_bins, 0)],
        0.0,
    )                                                                        # (B,E,S-1)
    v = up * fwd.unit * fwd.acoustic[..., :-1]
    w = cache.trans * cache.alpha
    d_acoustic = np.zeros_like(cache.sdf)
    d_acoustic[..., :-1] = up * w * fwd.unit
    d_alpha = _composite_backward(v, cache.alpha, cache.trans, d_alpha_extra)
    d_sdf, d_log_q = _alpha_to_field_adjoints(cache, field.q, d_alpha)
    grid_backprop(
        field,
        cache.pts.reshape(-1, 3),
        GridAdjoint(
            d_sdf=d_sdf.reshape(-1),
            d_grad=None if d_grad is None else d_grad.reshape(-1, 3),
            d_acoustic=d_acoustic.reshape(-1),
        ),
        buf,
        ctx=cache.ctx,
    )
    buf.d_log_q += d_log_q


def render_sonar_column(field: FieldModel, sonar: SonarModel, pose: Pose, theta: float,
                        phi: float, n_radial: int, jitter=None) -> np.ndarray:
    """Per-range-bin sums of (1/r) T alpha albedo for one (theta, phi) beam.

    Raw column contributions: multiply by E_e * dphi and sum over elevations
    to obtain sonar pixel intensities.
    """
    radii = sonar_radii(sonar, n_radial, jitter)[None, None, :]
    fwd = sonar_forward(
        field, sonar, pose.R[None], pose.t[None],
        np.array([theta]), np.array([[phi]]), radii,
    )
    dphi = sonar.phi_max - sonar.phi_min  # E = 1 in this call
    return fwd.bins[0] / (sonar.e_e * dphi)


def render_sonar_pixel(field: FieldModel, sonar: SonarModel, pose: Pose, range_bin: int,
                       theta: float, n_phi: int, n_radial: int, jitter=None) -> float:
    """Naive per-bin oracle: march each elevation only to the bin's outer
    edge and sum in-bin weights. Kept deliberately simple; the production
    path is sonar_forward/render_sonar_column."""
    if not 0 <= range_bin < sonar.n_range_bins:
        raise ValueError("range_bin outside the image")
    if n_phi < 1 or n_radial < 1:
        raise ValueError("counts must be >= 1")
    outer = sonar.r_min + (range_bin + 1) * sonar.range_bin_width
    inner = outer - sonar.range_bin_width
    radii_all = sonar_radii(sonar, n_radial, jitter)
    # truncate the shared radial grid at the bin's outer edge, keeping one
    # closing sample so the last in-bin interval still has an opacity pair
    inside = radii_all < outer
    last = int(np.flatnonzero(inside)[-1]) if inside.any() else -1
    radii = radii_all[: min(last + 2, n_radial)]
    if radii.size < 2:
        return 0.0
    dphi = (sonar.phi_max - sonar.phi_min) / n_phi
    q = field.q
    total = 0.0
    for phi in sonar.elevation_centers(n_phi):
        d = spherical_to_cartesian(1.0, theta, phi)
        pts = pose.t[None, :] + radii[:, None] * (pose.R @ d)[None, :]
        gs = grid_sample(field, pts)
        log_phi = _log_sigmoid(q * gs.sdf)
        alpha = np.maximum(1.0 - np.exp(log_phi[1:] - log_phi[:-1]), 0.0)
        trans = transmittance(alpha)
        r_anchor = radii[:-1]
        in_bin = (r_anchor >= inner) & (r_anchor < outer)
        total += dphi * np.sum(
            trans[in_bin] * alpha[in_bin] * gs.acoustic[:-1][in_bin] / r_anchor[in_bin]
        )
    return float(sonar.e_e * total)


# ---------------------------------------------------------------------------
# whole-image prediction (debugging / CLI `render`)
# ---------------------------------------------------------------------------

def render_camera_image(field: FieldModel, cam, pose: Pose, n_samples: int = 64) -> np.ndarray:
    """Predicted RGB image (H, W, 3) at a camera pose (no jitter)."""
    us, vs = np.meshgrid(np.arange(cam.width), np.arange(cam.height), indexing="xy")
    origins, dirs = camera_rays(cam, pose, us.ravel(), vs.ravel())
    pts, valid = camera_sample_points(field, origins, dirs, n_samples)
    fwd = camera_forward_points(field, pts, valid)
    return fwd.pixel.reshape(cam.height, cam.width, 3)


def render_sonar_image(field: FieldModel, sonar: SonarModel, pose: Pose,
                       n_phi: int = 24, n_radial: int = 96) -> np.ndarray:
    """Predicted sonar intensity image (n_range_bins, n_azimuth_bins)."""
    thetas = sonar.azimuth_centers()
    b = thetas.size
    phis = np.broadcast_to(sonar.elevation_centers(n_phi), (b, n_phi)).copy()
    radii = np.broadcast_to(sonar_radii(sonar, n_radial), (b, n_phi, n_radial)).copy()
    fwd = sonar_forward(
        field, sonar,
        np.broadcast_to(pose.R, (b, 3, 3)).copy(),
        np.broadcast_to(pose.t, (b, 3)).copy(),
        thetas, phis, radii,
    )
    return fwd.bins.T.copy()
