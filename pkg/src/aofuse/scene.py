"""Analytic ground-truth scenes.

A scene is a union of exact signed-distance primitives (sphere, box, torus,
capsule) with one acoustic/optical material. Scenes are immutable after
construction and serve as the geometry oracle for the simulators and the
evaluation metrics; nothing in the reconstruction path reads them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NORMAL_STEP = 1e-5  # central-difference step for surface normals, meters


@dataclass(frozen=True)
class Material:
    """Acoustic reflection strengths plus optical albedo.

    c_dl, c_sl: diffuse / specular lobe strengths (dimensionless, >= 0).
    sigma_alpha: std of the microfacet slope distribution, radians (> 0).
    optical_albedo: RGB triple in [0, 1].
    """

    c_dl: float = 1.0
    c_sl: float = 0.0
    sigma_alpha: float = 0.5
    optical_albedo: tuple[float, float, float] = (0.7, 0.7, 0.7)

    def __post_init__(self):
        if self.c_dl < 0 or self.c_sl < 0:
            raise ValueError("reflection strengths must be >= 0")
        if self.sigma_alpha <= 0:
            raise ValueError("sigma_alpha must be > 0")
        if any(not 0.0 <= a <= 1.0 for a in self.optical_albedo):
            raise ValueError("albedo channels must lie in [0, 1]")


def rotation_from_ypr(yaw: float, pitch: float, roll: float) -> np.ndarray:
    """R = Ry(yaw) @ Rx(pitch) @ Rz(roll), all angles in radians."""
    cy, sy = np.cos(yaw), np.sin(yaw)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cr, sr = np.cos(roll), np.sin(roll)
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rx = np.array([[1, 0, 0], [0, cp, -sp], [0, sp, cp]])
    rz = np.array([[cr, -sr, 0], [sr, cr, 0], [0, 0, 1]])
    return ry @ rx @ rz


@dataclass(frozen=True)
class Primitive:
    """One exact-SDF solid, posed in the world.

    dimensions by shape:
      sphere : (radius,)
      box    : (sx, sy, sz) full side lengths
      torus  : (major_radius, minor_radius), axis along local z
      capsule: (half_height, radius), segment along local z
    """

    shape: str
    center: tuple[float, float, float]
    dimensions: tuple[float, ...]
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        if self.shape not in ("sphere", "box", "torus", "capsule"):
            raise ValueError(f"unknown primitive shape {self.shape!r}")
        if any(d <= 0 for d in self.dimensions):
            raise ValueError("primitive dimensions must be positive")
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float))

    def sdf(self, pts: np.ndarray) -> np.ndarray:
        """Exact signed distance at pts (..., 3)."""
        p = (np.asarray(pts, dtype=float) - np.asarray(self.center)) @ self.rotation
        if self.shape == "sphere":
            return np.linalg.norm(p, axis=-1) - self.dimensions[0]
        if self.shape == "box":
            half = 0.5 * np.asarray(self.dimensions)
            q = np.abs(p) - half
            outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
            inside = np.minimum(np.max(q, axis=-1), 0.0)
            return outside + inside
        if self.shape == "torus":
            major, minor = self.dimensions
            ring = np.hypot(np.linalg.norm(p[..., :2], axis=-1) - major, p[..., 2])
            return ring - minor
        # capsule: distance to the segment z in [-h, h], minus radius
        h, r = self.dimensions
        z = np.clip(p[..., 2], -h, h)
        seg = p.copy()
        seg[..., 2] -= z
        return np.linalg.norm(seg, axis=-1) - r

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Conservative world-space AABB of the primitive."""
        if self.shape == "sphere":
            r = self.dimensions[0]
            half = np.array([r, r, r])
        elif self.shape == "box":
            half = 0.5 * np.asarray(self.dimensions)
        elif self.shape == "torus":
            major, minor = self.dimensions
            half = np.array([major + minor, major + minor, minor])
        else:
            h, r = self.dimensions
            half = np.array([r, r, h + r])
        # rotation can only shrink per-axis extents of the AABB's bounding ball
        half = np.abs(self.rotation) @ half
        c = np.asarray(self.center)
        return c - half, c + half


@dataclass(frozen=True)
class AnalyticScene:
    """Union of primitives with a shared material. sdf = min over members."""

    primitives: tuple[Primitive, ...]
    material: Material = field(default_factory=Material)

    def __post_init__(self):
        object.__setattr__(self, "primitives", tuple(self.primitives))
        if not self.primitives:
            raise ValueError("scene needs at least one primitive")

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        los, his = zip(*(p.bounds() for p in self.primitives))
        return np.min(los, axis=0), np.max(his, axis=0)


def sdf_eval(scene: AnalyticScene, x) -> np.ndarray | float:
    """Signed distance of the scene union at x, shape (..., 3) or (3,)."""
    x = np.asarray(x, dtype=float)
    d = np.min([p.sdf(x) for p in scene.primitives], axis=0)
    return float(d) if x.ndim == 1 else d


def sdf_normals(scene: AnalyticScene, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Outward unit normals at pts (N, 3) via central differences.

    Returns (normals, degenerate_mask); degenerate points (gradient norm
    below 1e-12, e.g. an exact center) get the fixed fallback (1, 0, 0).
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    grad = np.empty_like(pts)
    for ax in range(3):
        e = np.zeros(3)
        e[ax] = NORMAL_STEP
        grad[:, ax] = (sdf_eval(scene, pts + e) - sdf_eval(scene, pts - e)) / (2 * NORMAL_STEP)
    norm = np.linalg.norm(grad, axis=1)
    degenerate = norm < 1e-12
    safe = np.where(degenerate, 1.0, norm)
    n = grad / safe[:, None]
    n[degenerate] = (1.0, 0.0, 0.0)
    return n, degenerate


def sdf_normal(scene: AnalyticScene, x) -> np.ndarray:
    """Unit normal at a single point (degenerate points fall back to +x)."""
    n, _ = sdf_normals(scene, np.asarray(x, dtype=float)[None, :])
    return n[0]


def sphere_trace(
    scene: AnalyticScene,
    origins: np.ndarray,
    dirs: np.ndarray,
    t_max: float,
    tol: float = 1e-6,
    max_steps: int = 256,
) -> tuple[np.ndarray, np.ndarray]:
    """March rays to the first |sdf| < tol surface hit.

    origins, dirs: (N, 3), dirs unit-norm. Returns (t, hit) with t the ray
    parameter (== Euclidean distance) and hit a bool mask; t is t_max where
    no surface was found.
    """
    origins = np.atleast_2d(np.asarray(origins, dtype=float))
    dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
    n = origins.shape[0]
    t = np.zeros(n)
    hit = np.zeros(n, dtype=bool)
    active = np.ones(n, dtype=bool)
    for _ in range(max_steps):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        p = origins[idx] + t[idx, None] * dirs[idx]
        d = np.asarray(sdf_eval(scene, p))
        found = np.abs(d) < tol
        hit[idx[found]] = True
        active[idx[found]] = False
        adv = idx[~found]
        t[adv] += d[~found]
        over = t[adv] > t_max
        t[adv[over]] = t_max
        active[adv[over]] = False
    return t, hit
