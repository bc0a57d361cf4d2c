"""Optimizable scene representation: a dense voxel SDF grid plus
per-modality appearance grids and a trainable sigmoid sharpness.

All quantities are evaluated by trilinear interpolation; the spatial
gradient is the exact analytic gradient of the interpolant, and
grid_backprop accumulates the exact adjoint of every output with respect
to the grid node values. No autodiff framework is involved: closed forms
only, which keeps gradient checks honest and the dependencies minimal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Corner enumeration: bit b2 b1 b0 -> offset (x, y, z)
_CORNERS = np.array(
    [[0, 0, 0], [0, 0, 1], [0, 1, 0], [0, 1, 1], [1, 0, 0], [1, 0, 1], [1, 1, 0], [1, 1, 1]],
    dtype=np.int64,
)


@dataclass
class FieldModel:
    """Trainable field: sdf + acoustic albedo + optical albedo + log_q.

    Grids are (nx, ny, nz) float64 (optical adds a trailing RGB axis) with
    nodes at bbox_min + i * spacing; spacing = extent / (resolution - 1).
    The sigmoid sharpness q is stored as log_q so q stays positive.
    """

    bbox_min: np.ndarray
    bbox_max: np.ndarray
    sdf: np.ndarray
    acoustic: np.ndarray
    optical: np.ndarray
    log_q: float

    def __post_init__(self):
        self.bbox_min = np.asarray(self.bbox_min, dtype=float).reshape(3)
        self.bbox_max = np.asarray(self.bbox_max, dtype=float).reshape(3)
        self.sdf = np.asarray(self.sdf, dtype=float)
        self.acoustic = np.asarray(self.acoustic, dtype=float)
        self.optical = np.asarray(self.optical, dtype=float)
        if self.sdf.ndim != 3 or min(self.sdf.shape) < 2:
            raise ValueError("sdf grid must be 3-d with at least 2 nodes per axis")
        if self.acoustic.shape != self.sdf.shape or self.optical.shape != self.sdf.shape + (3,):
            raise ValueError("appearance grids must match the sdf resolution")
        if not np.all(self.bbox_max > self.bbox_min):
            raise ValueError("bbox_max must exceed bbox_min")

    @property
    def resolution(self) -> tuple[int, int, int]:
        return self.sdf.shape

    @property
    def q(self) -> float:
        return float(np.exp(self.log_q))

    @property
    def spacing(self) -> np.ndarray:
        return (self.bbox_max - self.bbox_min) / (np.array(self.sdf.shape) - 1)

    def node_axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(
            np.linspace(self.bbox_min[a], self.bbox_max[a], self.sdf.shape[a]) for a in range(3)
        )

    def node_points(self) -> np.ndarray:
        ax, ay, az = self.node_axes()
        gx, gy, gz = np.meshgrid(ax, ay, az, indexing="ij")
        return np.stack([gx, gy, gz], axis=-1).reshape(-1, 3)

    @classmethod
    def initialize(
        cls,
        bbox_min,
        bbox_max,
        resolution: int | tuple[int, int, int] = 64,
        sphere_frac: float = 0.4,
        acoustic_init: float = 0.5,
        optical_init: float = 0.5,
        q_init: float = 20.0,
    ) -> "FieldModel":
        """Fresh field: SDF of a centered sphere with radius
        sphere_frac * (smallest bbox half-extent), flat albedos."""
        bbox_min = np.asarray(bbox_min, dtype=float)
        bbox_max = np.asarray(bbox_max, dtype=float)
        res = (resolution,) * 3 if np.isscalar(resolution) else tuple(resolution)
        center = (bbox_min + bbox_max) / 2
        radius = sphere_frac * np.min((bbox_max - bbox_min) / 2)
        axes = [np.linspace(bbox_min[a], bbox_max[a], res[a]) for a in range(3)]
        gx, gy, gz = np.meshgrid(*axes, indexing="ij")
        dist = np.sqrt((gx - center[0]) ** 2 + (gy - center[1]) ** 2 + (gz - center[2]) ** 2)
        return cls(
            bbox_min,
            bbox_max,
            dist - radius,
            np.full(res, float(acoustic_init)),
            np.full(res + (3,), float(optical_init)),
            float(np.log(q_init)),
        )

    @classmethod
    def for_bounds(cls, lo, hi, resolution=64, padding=0.2, **kw) -> "FieldModel":
        """Cubic bbox containing (lo, hi) padded by `padding` per side."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        center = (lo + hi) / 2
        half = (1.0 + padding) * np.max(hi - lo) / 2
        return cls.initialize(center - half, center + half, resolution, **kw)

    def copy(self) -> "FieldModel":
        return FieldModel(
            self.bbox_min.copy(), self.bbox_max.copy(),
            self.sdf.copy(), self.acoustic.copy(), self.optical.copy(), self.log_q,
        )


@dataclass
class GradientBuffer:
    """Accumulates d(loss)/d(parameter), same shapes as the trainable fields."""

    d_sdf: np.ndarray
    d_acoustic: np.ndarray
    d_optical: np.ndarray
    d_log_q: float

    @classmethod
    def zeros_like(cls, field: FieldModel) -> "GradientBuffer":
        return cls(
            np.zeros_like(field.sdf), np.zeros_like(field.acoustic),
            np.zeros_like(field.optical), 0.0,
        )

    def zero(self) -> None:
        self.d_sdf[...] = 0.0
        self.d_acoustic[...] = 0.0
        self.d_optical[...] = 0.0
        self.d_log_q = 0.0

    def all_finite(self) -> bool:
        return bool(
            np.isfinite(self.d_sdf).all()
            and np.isfinite(self.d_acoustic).all()
            and np.isfinite(self.d_optical).all()
            and np.isfinite(self.d_log_q)
        )


@dataclass
class GridSample:
    """Batched grid_sample outputs; arrays are (N,), grad/optical (N, 3)."""

    sdf: np.ndarray
    grad: np.ndarray
    acoustic: np.ndarray
    optical: np.ndarray
    out_of_box: np.ndarray


@dataclass
class GridAdjoint:
    """Upstream adjoints fed to grid_backprop; any entry may be None."""

    d_sdf: np.ndarray | None = None
    d_grad: np.ndarray | None = None
    d_acoustic: np.ndarray | None = None
    d_optical: np.ndarray | None = None


@dataclass
class GridContext:
    """Precomputed interpolation stencil for one point batch.

    Computing this dominates sampling cost, so forward passes cache it and
    hand it back to grid_backprop instead of relocating the points.
    """

    flat: np.ndarray       # (N, 8) flattened corner indices
    weights: np.ndarray    # (N, 8) trilinear weights
    dweights: np.ndarray   # (N, 8, 3) d(weight)/dx incl. the 1/spacing factor
    oob: np.ndarray        # (N,) outside-bbox mask
    oob_dist: np.ndarray   # (N,) distance to the bbox


def locate(field: FieldModel, pts: np.ndarray) -> GridContext:
    """Cell lookup shared by sampling and backprop."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    lo, hi = field.bbox_min, field.bbox_max
    clamped = np.clip(pts, lo, hi)
    delta = pts - clamped
    oob_dist = np.sqrt(np.einsum("ni,ni->n", delta, delta))
    oob = oob_dist > 0.0

    res = np.asarray(field.sdf.shape)
    h = field.spacing
    u = (clamped - lo) / h
    cell = np.minimum(np.floor(u).astype(np.int64), res - 2)
    frac = u - cell
    n = pts.shape[0]

    wx = np.stack([1.0 - frac[:, 0], frac[:, 0]], axis=1)   # (N, 2)
    wy = np.stack([1.0 - frac[:, 1], frac[:, 1]], axis=1)
    wz = np.stack([1.0 - frac[:, 2], frac[:, 2]], axis=1)
    wyz = (wy[:, :, None] * wz[:, None, :]).reshape(n, 4)
    weights = (wx[:, :, None] * wyz[:, None, :]).reshape(n, 8)

    # corner index bit order is (x, y, z), so flat corner c = 4a + 2b + c
    dw = np.empty((n, 8, 3))
    dw[:, :4, 0] = -wyz / h[0]
    dw[:, 4:, 0] = wyz / h[0]
    syz = np.empty((n, 4))
    syz[:, :2] = -wz / h[1]
    syz[:, 2:] = wz / h[1]
    dw[:, :, 1] = (wx[:, :, None] * syz[:, None, :]).reshape(n, 8)
    sy = np.empty((n, 4))
    sy[:, 0::2] = -wy / h[2]
    sy[:, 1::2] = wy / h[2]
    dw[:, :, 2] = (wx[:, :, None] * sy[:, None, :]).reshape(n, 8)

    ny, nz = field.sdf.shape[1], field.sdf.shape[2]
    base = (cell[:, 0] * ny + cell[:, 1]) * nz + cell[:, 2]
    offsets = (_CORNERS[:, 0] * ny + _CORNERS[:, 1]) * nz + _CORNERS[:, 2]
    flat = base[:, None] + offsets[None, :]
    return GridContext(flat, weights, dw, oob, oob_dist)


def grid_sample(field: FieldModel, x, ctx: GridContext | None = None,
                want_acoustic: bool = True, want_optical: bool = True) -> GridSample:
    """Trilinear sample of the grids at x ((N, 3) or (3,)).

    Points outside the bbox are clamped to it; their sdf additionally gains
    the (positive) distance to the bbox so the renderer sees empty space
    beyond the modeled volume, and out_of_box flags them. Skipped albedo
    channels come back as None; pass a cached ctx to avoid relocating.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if ctx is None:
        ctx = locate(field, x)
    flat, w = ctx.flat, ctx.weights

    corners_sdf = field.sdf.reshape(-1)[flat]               # (N, 8)
    sdf = np.einsum("nc,nc->n", corners_sdf, w) + ctx.oob_dist
    grad = np.einsum("nc,nca->na", corners_sdf, ctx.dweights)
    acoustic = (
        np.einsum("nc,nc->n", field.acoustic.reshape(-1)[flat], w)
        if want_acoustic else None
    )
    optical = (
        np.einsum("ncr,nc->nr", field.optical.reshape(-1, 3)[flat], w)
        if want_optical else None
    )

    out = GridSample(sdf, grad, acoustic, optical, ctx.oob)
    if single:
        return GridSample(
            float(out.sdf[0]), out.grad[0],
            None if acoustic is None else float(out.acoustic[0]),
            None if optical is None else out.optical[0],
            bool(out.out_of_box[0]),
        )
    return out


def grid_backprop(field: FieldModel, x, upstream: GridAdjoint, buf: GradientBuffer,
                  ctx: GridContext | None = None) -> None:
    """Accumulate upstream adjoints onto the 8 surrounding nodes per point.

    The adjoint of the sampled value w.r.t. a corner is its trilinear
    weight; the adjoint of the spatial gradient is the weight's analytic
    derivative (the interpolant is linear in the corner values, so both
    are exact).
    """
    if ctx is None:
        ctx = locate(field, np.atleast_2d(np.asarray(x, dtype=float)))
    w = ctx.weights
    size = field.sdf.size
    idx = ctx.flat.reshape(-1)

    if upstream.d_sdf is not None or upstream.d_grad is not None:
        contrib = None
        if upstream.d_sdf is not None:
            contrib = np.asarray(upstream.d_sdf, dtype=float).reshape(-1, 1) * w
        if upstream.d_grad is not None:
            dg = np.atleast_2d(np.asarray(upstream.d_grad, dtype=float))
            gterm = np.einsum("na,nca->nc", dg, ctx.dweights)
            contrib = gterm if contrib is None else contrib + gterm
        buf.d_sdf += np.bincount(idx, weights=contrib.reshape(-1), minlength=size).reshape(
            field.sdf.shape
        )
    if upstream.d_acoustic is not None:
        contrib = np.asarray(upstream.d_acoustic, dtype=float).reshape(-1, 1) * w
        buf.d_acoustic += np.bincount(idx, weights=contrib.reshape(-1), minlength=size).reshape(
            field.acoustic.shape
        )
    if upstream.d_optical is not None:
        dop = np.atleast_2d(np.asarray(upstream.d_optical, dtype=float))
        for ch in range(3):
            contrib = dop[:, ch].reshape(-1, 1) * w
            buf.d_optical[..., ch] += np.bincount(
                idx, weights=contrib.reshape(-1), minlength=size
            ).reshape(field.sdf.shape)
