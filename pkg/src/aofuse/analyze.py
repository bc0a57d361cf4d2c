"""Conditioning analysis and reconstruction evaluation.

Conditioning: one 3D point observed from two sensor positions yields eight
measurements (x_c, y_c, R, theta per view) that linearize into seven
constraint rows on P plus the nonlinear range constraint |P|^2 = R^2.
Stacked as A_multi P = b with

    rows 1-2: image-plane rows of view 1,
    row  3  : azimuth row of view 1,
    rows 4-5: image-plane rows of view 2,
    row  6  : azimuth row of view 2,
    row  7  : the range-difference row t'R,

the camera-only system keeps rows {1, 2, 4, 5} and the sonar-only system
rows {3, 6, 7}. Note on row 4: expanding x_c' = f (r1.P + t_x)/(r3.P + t_z)
forces the coefficient x_c' r3 - f * r1 (with r1, NOT r2 -- a frequently
miscopied row); the noiseless row-residual test in the suite is the proof.

Evaluation: marching-cubes extraction of the zero level set, Chamfer L1 /
precision / recall against either a mesh or an analytic scene (where exact
point-to-surface distances come from the scene SDF), and per-axis absolute
deviation histograms.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.spatial import cKDTree
from skimage import measure as _sk_measure

from .errors import DegenerateError, EmptyMeshError, EmptySurfaceError, RankDeficientError
from .field import FieldModel
from .rng import stream
from .scene import AnalyticScene, Primitive, sdf_eval, sdf_normals
from .sensors import TwoViewObservation, observe_two_view

RANK_TOL = 1e-14           # sigma_min / sigma_max below this counts as degenerate
CAMERA_ROWS = (0, 1, 3, 4)
SONAR_ROWS = (2, 5, 6)


# ---------------------------------------------------------------------------
# constraint systems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstraintSystem:
    """Linear system A P = b (7 rows) plus the view-1 range for bookkeeping."""

    A: np.ndarray
    b: np.ndarray
    range_constraint: float

    @property
    def camera(self) -> tuple[np.ndarray, np.ndarray]:
        return self.A[list(CAMERA_ROWS)], self.b[list(CAMERA_ROWS)]

    @property
    def sonar(self) -> tuple[np.ndarray, np.ndarray]:
        return self.A[list(SONAR_ROWS)], self.b[list(SONAR_ROWS)]

    def select(self, which: str) -> tuple[np.ndarray, np.ndarray]:
        if which == "multi":
            return self.A, self.b
        if which == "cam":
            return self.camera
        if which == "son":
            return self.sonar
        raise ValueError(f"unknown subsystem {which!r}")


def build_constraints(obs: TwoViewObservation, f: float, R, t) -> ConstraintSystem:
    """Stack the seven linear constraint rows for one two-view observation."""
    R = np.asarray(R, dtype=float).reshape(3, 3)
    t = np.asarray(t, dtype=float).reshape(3)
    for th in (obs.theta1, obs.theta2):
        if abs(abs(th) - np.pi / 2) <= 1e-9:
            raise DegenerateError("azimuth too close to +-pi/2 for tan()")
    r1, r2, r3 = R[0], R[1], R[2]
    tan1, tan2 = np.tan(obs.theta1), np.tan(obs.theta2)
    A = np.stack([
        np.array([-f, 0.0, obs.x_c]),
        np.array([0.0, -f, obs.y_c]),
        np.array([0.0, -1.0, tan1]),
        obs.x_c2 * r3 - f * r1,
        obs.y_c2 * r3 - f * r2,
        tan2 * r3 - r2,
        t @ R,
    ])
    b = np.array([
        0.0,
        0.0,
        0.0,
        f * t[0] - obs.x_c2 * t[2],
        f * t[1] - obs.y_c2 * t[2],
        t[1] - tan2 * t[2],
        (obs.r2**2 - obs.r1**2 - t @ t) / 2.0,
    ])
    return ConstraintSystem(A, b, obs.r1)


# ---------------------------------------------------------------------------
# condition numbers (closed-form symmetric 3x3 eigensolve)
# ---------------------------------------------------------------------------

def _sym3_eigvals(m: np.ndarray) -> np.ndarray:
    """Eigenvalues of symmetric (..., 3, 3) matrices, descending, by the
    trigonometric closed form."""
    a, b, c = m[..., 0, 0], m[..., 1, 1], m[..., 2, 2]
    d, e, f = m[..., 0, 1], m[..., 1, 2], m[..., 0, 2]
    q = (a + b + c) / 3.0
    p2 = (a - q) ** 2 + (b - q) ** 2 + (c - q) ** 2 + 2.0 * (d**2 + e**2 + f**2)
    p = np.sqrt(np.maximum(p2 / 6.0, 0.0))
    safe_p = np.where(p > 0, p, 1.0)
    ba, bb, bc = (a - q) / safe_p, (b - q) / safe_p, (c - q) / safe_p
    bd, be, bf = d / safe_p, e / safe_p, f / safe_p
    det_b = ba * (bb * bc - be * be) - bd * (bd * bc - be * bf) + bf * (bd * be - bb * bf)
    r = np.clip(det_b / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    e1 = q + 2.0 * p * np.cos(phi)
    e3 = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    e2 = 3.0 * q - e1 - e3
    return np.stack([e1, e2, e3], axis=-1)


def condition_numbers(As: np.ndarray) -> np.ndarray:
    """kappa = sigma_max / sigma_min for a batch of (..., m, 3) matrices.

    Computed from the eigenvalues of A'A; numerically rank-deficient
    matrices (sigma_min < 1e-14 sigma_max) get the +inf sentinel.
    """
    As = np.asarray(As, dtype=float)
    gram = np.einsum("...mi,...mj->...ij", As, As)
    lam = np.maximum(_sym3_eigvals(gram), 0.0)
    s_max = np.sqrt(lam[..., 0])
    s_min = np.sqrt(lam[..., 2])
    with np.errstate(divide="ignore", invalid="ignore"):
        kappa = np.where(s_min > RANK_TOL * s_max, s_max / s_min, np.inf)
    kappa = np.where(s_max == 0.0, np.inf, kappa)
    return kappa


def condition_number(A: np.ndarray) -> float:
    """kappa of one m x 3 matrix (m >= 3); +inf when rank-deficient."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[1] != 3 or A.shape[0] < 3:
        raise ValueError("expected an m x 3 matrix with m >= 3")
    return float(condition_numbers(A[None])[0])


def triangulate(sys: ConstraintSystem, which: str = "multi") -> np.ndarray:
    """Least-squares point estimate from the selected subsystem.

    Normal equations with a 3x3 solve, then two iterative-refinement steps
    (cheap, and keeps noiseless recovery at ~kappa * eps rather than
    kappa^2 * eps).
    """
    A, b = sys.select(which)
    if not np.isfinite(condition_number(A)):
        raise RankDeficientError(f"{which} system is rank-deficient")
    gram = A.T @ A
    try:
        p = np.linalg.solve(gram, A.T @ b)
        for _ in range(2):
            p = p + np.linalg.solve(gram, A.T @ (b - A @ p))
    except np.linalg.LinAlgError as exc:
        raise RankDeficientError(str(exc)) from exc
    return p


# ---------------------------------------------------------------------------
# Monte Carlo conditioning study
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConditioningDistributions:
    """Sampling ranges for the Monte Carlo study (base quantities in meters:
    points uniform in a 1 m^3 cube centered at (0,0,1.5), f = 100 mm,
    translations uniform in [0, 10] cm per axis, yaw/pitch/roll uniform in
    +-5 degrees).

    length_scale sets the working unit of the stacked system (units per
    meter; 100 = centimeters). The constraint rows mix dimensionless
    azimuth rows with length-bearing rows, so raw (unnormalized) condition
    numbers depend on this unit: the centimeter default matches the unit
    the study quotes its translations in and exhibits the strong multimodal
    advantage; in meters the median ordering survives but the gap shrinks.
    """

    point_center: tuple[float, float, float] = (0.0, 0.0, 1.5)
    point_halfwidth: float = 0.5
    f: float = 0.1
    t_min: float = 0.0
    t_max: float = 0.1
    angle_max_deg: float = 5.0
    length_scale: float = 100.0

    @property
    def f_working(self) -> float:
        return self.f * self.length_scale


@dataclass
class CondSample:
    """One Monte Carlo draw with its three condition numbers."""

    P: np.ndarray
    R: np.ndarray
    t: np.ndarray
    f: float
    kappa_cam: float
    kappa_son: float
    kappa_multi: float


@dataclass
class ConditioningResult:
    kappa_cam: np.ndarray
    kappa_son: np.ndarray
    kappa_multi: np.ndarray

    def median(self, which: str) -> float:
        k = getattr(self, f"kappa_{which}")
        return float(np.median(k[np.isfinite(k)]))

    def degenerate_counts(self) -> dict:
        return {
            w: int(np.sum(~np.isfinite(getattr(self, f"kappa_{w}"))))
            for w in ("cam", "son", "multi")
        }

    def histogram(self, lo: float = 0.0, hi: float = 16.0, width: float = 0.2):
        """log10(kappa) histogram; overflow clips into the last bin."""
        edges = np.arange(lo, hi + width / 2, width)
        counts = {}
        for w in ("cam", "son", "multi"):
            k = getattr(self, f"kappa_{w}")
            logk = np.clip(np.log10(k[np.isfinite(k)]), lo, hi - width / 2)
            counts[w] = np.histogram(logk, bins=edges)[0]
        return edges, counts


def _rotations_from_ypr(ypr: np.ndarray) -> np.ndarray:
    """Batched R = Ry(yaw) @ Rx(pitch) @ Rz(roll); ypr (..., 3) radians."""
    yaw, pitch, roll = ypr[..., 0], ypr[..., 1], ypr[..., 2]
    cy, sy = np.cos(yaw), np.sin(yaw)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cr, sr = np.cos(roll), np.sin(roll)
    zeros = np.zeros_like(yaw)
    ones = np.ones_like(yaw)
    ry = np.stack([cy, zeros, sy, zeros, ones, zeros, -sy, zeros, cy], -1).reshape(ypr.shape[:-1] + (3, 3))
    rx = np.stack([ones, zeros, zeros, zeros, cp, -sp, zeros, sp, cp], -1).reshape(ypr.shape[:-1] + (3, 3))
    rz = np.stack([cr, -sr, zeros, sr, cr, zeros, zeros, zeros, ones], -1).reshape(ypr.shape[:-1] + (3, 3))
    return ry @ rx @ rz


def draw_two_view_geometry(n: int, seed: int,
                           dist: ConditioningDistributions = ConditioningDistributions()):
    """Sample (P, R, t) batches, expressed in the working length unit."""
    rng = stream(seed, "conditioning")
    p = rng.uniform(-dist.point_halfwidth, dist.point_halfwidth, (n, 3)) + np.asarray(
        dist.point_center
    )
    t = rng.uniform(dist.t_min, dist.t_max, (n, 3))
    ypr = rng.uniform(
        -np.deg2rad(dist.angle_max_deg), np.deg2rad(dist.angle_max_deg), (n, 3)
    )
    return p * dist.length_scale, _rotations_from_ypr(ypr), t * dist.length_scale


def build_constraints_batch(p: np.ndarray, rot: np.ndarray, t: np.ndarray, f: float):
    """Vectorized noiseless observation + constraint assembly.

    Returns (A (n, 7, 3), b (n, 7)); geometry must keep both views in front
    of the camera and azimuths away from +-pi/2 (true for the study's
    distributions).
    """
    n = p.shape[0]
    p2 = np.einsum("nij,nj->ni", rot, p) + t
    x_c = f * p[:, 0] / p[:, 2]
    y_c = f * p[:, 1] / p[:, 2]
    tan1 = p[:, 1] / p[:, 2]
    x_c2 = f * p2[:, 0] / p2[:, 2]
    y_c2 = f * p2[:, 1] / p2[:, 2]
    tan2 = p2[:, 1] / p2[:, 2]
    r1v, r2v, r3v = rot[:, 0, :], rot[:, 1, :], rot[:, 2, :]

    A = np.zeros((n, 7, 3))
    A[:, 0, 0] = -f
    A[:, 0, 2] = x_c
    A[:, 1, 1] = -f
    A[:, 1, 2] = y_c
    A[:, 2, 1] = -1.0
    A[:, 2, 2] = tan1
    A[:, 3] = x_c2[:, None] * r3v - f * r1v
    A[:, 4] = y_c2[:, None] * r3v - f * r2v
    A[:, 5] = tan2[:, None] * r3v - r2v
    A[:, 6] = np.einsum("ni,nij->nj", t, rot)

    r1sq = np.einsum("ni,ni->n", p, p)
    r2sq = np.einsum("ni,ni->n", p2, p2)
    b = np.zeros((n, 7))
    b[:, 3] = f * t[:, 0] - x_c2 * t[:, 2]
    b[:, 4] = f * t[:, 1] - y_c2 * t[:, 2]
    b[:, 5] = t[:, 1] - tan2 * t[:, 2]
    b[:, 6] = (r2sq - r1sq - np.einsum("ni,ni->n", t, t)) / 2.0
    return A, b


def monte_carlo_conditioning(n: int, seed: int,
                             dist: ConditioningDistributions = ConditioningDistributions()
                             ) -> ConditioningResult:
    """Condition numbers of the three forward models over n random draws."""
    if n < 1:
        raise ValueError("need n >= 1")
    p, rot, t = draw_two_view_geometry(n, seed, dist)
    A, _ = build_constraints_batch(p, rot, t, dist.f_working)
    return ConditioningResult(
        kappa_cam=condition_numbers(A[:, list(CAMERA_ROWS), :]),
        kappa_son=condition_numbers(A[:, list(SONAR_ROWS), :]),
        kappa_multi=condition_numbers(A),
    )


def conditioning_sample(index: int, seed: int,
                        dist: ConditioningDistributions = ConditioningDistributions()
                        ) -> CondSample:
    """One fully-described draw (handy for spot checks and debugging)."""
    p, rot, t = draw_two_view_geometry(index + 1, seed, dist)
    obs = observe_two_view(dist.f_working, rot[index], t[index], p[index])
    sys = build_constraints(obs, dist.f_working, rot[index], t[index])
    return CondSample(
        p[index], rot[index], t[index], dist.f_working,
        condition_number(sys.camera[0]),
        condition_number(sys.sonar[0]),
        condition_number(sys.A),
    )


def write_conditioning_reports(result: ConditioningResult, out_dir) -> None:
    from . import io as aio

    out = aio.ensure_dir(out_dir)
    edges, counts = result.histogram()
    rows = [
        (edges[i], edges[i + 1], counts["cam"][i], counts["son"][i], counts["multi"][i])
        for i in range(len(edges) - 1)
    ]
    aio.write_csv(out / "kappa_histogram.csv",
                  ["bin_lo", "bin_hi", "count_cam", "count_son", "count_multi"], rows)
    deg = result.degenerate_counts()
    aio.write_csv(
        out / "kappa_medians.csv",
        ["modality", "median_kappa", "n_finite", "n_degenerate"],
        [
            (w, result.median(w),
             int(np.isfinite(getattr(result, f"kappa_{w}")).sum()), deg[w])
            for w in ("cam", "son", "multi")
        ],
    )


# ---------------------------------------------------------------------------
# meshes and metrics
# ---------------------------------------------------------------------------

@dataclass
class TriMesh:
    vertices: np.ndarray
    faces: np.ndarray

    def areas(self) -> np.ndarray:
        a = self.vertices[self.faces[:, 0]]
        b = self.vertices[self.faces[:, 1]]
        c = self.vertices[self.faces[:, 2]]
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def sample_points(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform area-weighted surface samples."""
        areas = self.areas()
        total = areas.sum()
        if n < 1 or total <= 0:
            raise EmptySurfaceError("mesh has no area to sample")
        tri = rng.choice(len(self.faces), size=n, p=areas / total)
        u = rng.random(n)
        v = rng.random(n)
        flip = u + v > 1.0
        u[flip] = 1.0 - u[flip]
        v[flip] = 1.0 - v[flip]
        a = self.vertices[self.faces[tri, 0]]
        b = self.vertices[self.faces[tri, 1]]
        c = self.vertices[self.faces[tri, 2]]
        return a + u[:, None] * (b - a) + v[:, None] * (c - a)

    def save_ply(self, path) -> None:
        from .io import write_ply

        write_ply(path, self.vertices, self.faces)


def marching_cubes(field: FieldModel, iso: float = 0.0) -> TriMesh:
    """Zero-level-set triangle mesh of the SDF grid (linear edge interpolation)."""
    grid = field.sdf
    if grid.min() > iso or grid.max() < iso:
        raise EmptyMeshError("no sign change anywhere in the grid")
    try:
        verts, faces, _, _ = _sk_measure.marching_cubes(
            grid, level=iso, spacing=tuple(field.spacing)
        )
    except (ValueError, RuntimeError) as exc:
        raise EmptyMeshError(str(exc)) from exc
    return TriMesh(verts + field.bbox_min, faces.astype(int))


# surface areas of the analytic primitives, for area-weighted sampling
def _primitive_area(p: Primitive) -> float:
    if p.shape == "sphere":
        return 4.0 * np.pi * p.dimensions[0] ** 2
    if p.shape == "box":
        sx, sy, sz = p.dimensions
        return 2.0 * (sx * sy + sy * sz + sz * sx)
    if p.shape == "torus":
        major, minor = p.dimensions
        return 4.0 * np.pi**2 * major * minor
    h, r = p.dimensions
    return 2.0 * np.pi * r * (2.0 * h) + 4.0 * np.pi * r**2


def _sample_primitive(p: Primitive, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform area samples on one primitive's surface (local -> world)."""
    if p.shape == "sphere":
        d = rng.normal(size=(n, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        local = p.dimensions[0] * d
    elif p.shape == "box":
        sx, sy, sz = p.dimensions
        face_areas = np.repeat([sy * sz, sx * sz, sx * sy], 2)
        face = rng.choice(6, size=n, p=face_areas / face_areas.sum())
        uv = rng.uniform(-0.5, 0.5, (n, 2))
        local = np.empty((n, 3))
        half = np.array([sx, sy, sz]) / 2.0
        for axis in range(3):
            for side, sign in ((2 * axis, 1.0), (2 * axis + 1, -1.0)):
                m = face == side
                others = [a for a in range(3) if a != axis]
                local[m, axis] = sign * half[axis]
                local[m, others[0]] = uv[m, 0] * p.dimensions[others[0]]
                local[m, others[1]] = uv[m, 1] * p.dimensions[others[1]]
    elif p.shape == "torus":
        major, minor = p.dimensions
        out = []
        need = n
        while need > 0:
            u = rng.uniform(0, 2 * np.pi, 2 * need)
            v = rng.uniform(0, 2 * np.pi, 2 * need)
            accept = rng.random(2 * need) < (major + minor * np.cos(v)) / (major + minor)
            u, v = u[accept][:need], v[accept][:need]
            ring = major + minor * np.cos(v)
            out.append(np.stack([ring * np.cos(u), ring * np.sin(u), minor * np.sin(v)], 1))
            need -= len(u)
        local = np.concatenate(out)[:n]
    else:  # capsule: cylindrical side plus two hemispherical caps
        h, r = p.dimensions
        side_area = 2.0 * np.pi * r * 2.0 * h
        cap_area = 4.0 * np.pi * r**2
        on_side = rng.random(n) < side_area / (side_area + cap_area)
        u = rng.uniform(0, 2 * np.pi, n)
        z = rng.uniform(-h, h, n)
        local = np.stack([r * np.cos(u), r * np.sin(u), z], 1)
        caps = ~on_side
        if caps.any():
            d = rng.normal(size=(int(caps.sum()), 3))
            d /= np.linalg.norm(d, axis=1, keepdims=True)
            d[:, 2] = np.abs(d[:, 2])          # fold onto the upper hemisphere
            zsign = np.where(rng.random(len(d)) < 0.5, 1.0, -1.0)
            cap_pts = r * d
            cap_pts[:, 2] = zsign * (cap_pts[:, 2] + h)
            local[caps] = cap_pts
    return local @ p.rotation.T + np.asarray(p.center)


def sample_scene_surface(scene: AnalyticScene, n: int, rng: np.random.Generator,
                         max_rounds: int = 64) -> np.ndarray:
    """Area-weighted samples on the union surface.

    Primitive samples falling strictly inside another member (scene sdf < 0)
    are rejected and redrawn, so the result lies on the union boundary.
    """
    areas = np.array([_primitive_area(p) for p in scene.primitives])
    probs = areas / areas.sum()
    out = []
    need = n
    for _ in range(max_rounds):
        if need <= 0:
            break
        counts = rng.multinomial(need, probs)
        pts = [
            _sample_primitive(p, c, rng)
            for p, c in zip(scene.primitives, counts)
            if c > 0
        ]
        cand = np.concatenate(pts) if pts else np.empty((0, 3))
        keep = np.asarray(sdf_eval(scene, cand)) > -1e-9
        kept = cand[keep]
        out.append(kept[:need])
        need -= len(kept[:need])
    if need > 0:
        raise EmptySurfaceError("union rejection sampling failed to converge")
    return np.concatenate(out)


def closest_scene_points(scene: AnalyticScene, pts: np.ndarray,
                         iterations: int = 3) -> np.ndarray:
    """Project points to the scene surface along the (exact) SDF gradient."""
    x = np.array(pts, dtype=float)
    for _ in range(iterations):
        d = np.asarray(sdf_eval(scene, x))
        normals, _ = sdf_normals(scene, x)
        x = x - d[:, None] * normals
    return x


@dataclass
class ReconMetrics:
    chamfer_l1: float
    precision: float
    recall: float
    tau: float
    hist_edges: np.ndarray = dc_field(default=None)
    hist_counts: np.ndarray = dc_field(default=None)   # (3, n_bins): |dX|,|dY|,|dZ|


def nearest_distances(query: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Nearest-neighbor distances query -> reference via a KD-tree."""
    if len(reference) == 0 or len(query) == 0:
        raise EmptySurfaceError("empty point set")
    d, _ = cKDTree(reference).query(query, k=1)
    return np.asarray(d)


def metrics_from_points(pts_a: np.ndarray, pts_b: np.ndarray, tau: float,
                        d_a_to_b: np.ndarray | None = None) -> ReconMetrics:
    """Chamfer / precision / recall between two point sets.

    d_a_to_b overrides the a->b distances (used when exact SDF distances
    are available); precision gates a->b, recall gates b->a.
    """
    d_ab = nearest_distances(pts_a, pts_b) if d_a_to_b is None else np.asarray(d_a_to_b)
    d_ba = nearest_distances(pts_b, pts_a)
    return ReconMetrics(
        chamfer_l1=float(0.5 * (d_ab.mean() + d_ba.mean())),
        precision=float(np.mean(d_ab <= tau)),
        recall=float(np.mean(d_ba <= tau)),
        tau=tau,
    )


def chamfer_precision_recall(recon: TriMesh, gt, tau: float = 0.05,
                             n_samples: int = 20000, seed: int = 0,
                             recon_samples: np.ndarray | None = None,
                             gt_samples: np.ndarray | None = None) -> ReconMetrics:
    """Reconstruction-vs-ground-truth surface metrics.

    gt may be a TriMesh or an AnalyticScene; against a scene, recon->gt
    distances are the exact |sdf| values rather than nearest-sample
    distances. Deterministic per seed.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if recon_samples is None:
        recon_samples = recon.sample_points(n_samples, stream(seed, "metrics-recon"))
    if gt_samples is None:
        rng = stream(seed, "metrics-gt")
        if isinstance(gt, AnalyticScene):
            gt_samples = sample_scene_surface(gt, n_samples, rng)
        else:
            gt_samples = gt.sample_points(n_samples, rng)
    exact = None
    if isinstance(gt, AnalyticScene):
        exact = np.abs(np.asarray(sdf_eval(gt, recon_samples)))
    return metrics_from_points(recon_samples, gt_samples, tau, d_a_to_b=exact)


def per_axis_errors(recon: TriMesh, gt, n_samples: int = 20000, seed: int = 0,
                    bin_width: float = 0.005):
    """Histogram |dX|, |dY|, |dZ| between recon samples and their closest
    ground-truth points. Returns (edges, counts (3, n_bins)); counts sum to
    n_samples per axis."""
    pts = recon.sample_points(n_samples, stream(seed, "metrics-recon"))
    if isinstance(gt, AnalyticScene):
        closest = closest_scene_points(gt, pts)
    else:
        ref = gt.sample_points(max(4 * n_samples, 4096), stream(seed, "metrics-gt"))
        _, idx = cKDTree(ref).query(pts, k=1)
        closest = ref[idx]
    dev = np.abs(pts - closest)
    hi = max(float(dev.max()), bin_width)
    n_bins = int(np.ceil(hi / bin_width + 1e-12))
    edges = np.arange(n_bins + 1) * bin_width
    counts = np.stack([np.histogram(dev[:, a], bins=edges)[0] for a in range(3)])
    # points exactly at the top edge belong to the last bin
    for a in range(3):
        counts[a, -1] += int(np.sum(dev[:, a] == edges[-1]))
    return edges, counts


def write_per_axis_csv(path, edges: np.ndarray, counts: np.ndarray) -> None:
    from .io import write_csv

    rows = [
        (edges[i], edges[i + 1], counts[0][i], counts[1][i], counts[2][i])
        for i in range(len(edges) - 1)
    ]
    write_csv(path, ["bin_lo", "bin_hi", "count_x", "count_y", "count_z"], rows)
