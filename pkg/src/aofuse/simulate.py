"""Ground-truth measurement simulators.

Camera images come from per-pixel sphere tracing against the analytic scene
with headlight Lambertian shading. Sonar images come from first-return beam
marching: each (azimuth, elevation) ray deposits (E_e / r) * I_r(alpha) * dphi
into the range bin containing its hit, where I_r is the diffuse + specular
reflection model. Neither simulator touches the differentiable renderer, so
reconstructions are never validated against their own forward model.
"""

from __future__ import annotations

import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import io as aio
from .errors import BadConfigError
from .rng import stream
from .scene import AnalyticScene, Material, sdf_normals, sphere_trace
from .sensors import CameraModel, Pose, SonarModel, camera_rays, spherical_to_cartesian

GRAZING_LIMIT = np.pi / 2 - 1e-6

# Sonar mounted looking along world +Z with its elevation axis along world -X
# (proper rotation, det +1); the azimuthal (sensor yz) plane stays parallel to
# the world YZ plane for every pose on a linear X trajectory.
SONAR_FROM_RIG = Pose(np.diag([-1.0, -1.0, 1.0]), np.zeros(3))
CAMERA_FROM_RIG = Pose.identity()


@dataclass(frozen=True)
class Trajectory:
    """Rig poses translated linearly along world X, plus sensor offsets."""

    poses: tuple[Pose, ...]
    baseline: float
    camera_offset: Pose = CAMERA_FROM_RIG
    sonar_offset: Pose = SONAR_FROM_RIG
    standoff: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "poses", tuple(self.poses))

    def camera_pose(self, i: int) -> Pose:
        return self.poses[i].compose(self.camera_offset)

    def sonar_pose(self, i: int) -> Pose:
        return self.poses[i].compose(self.sonar_offset)

    def __len__(self) -> int:
        return len(self.poses)


@dataclass(frozen=True)
class SonarImage:
    intensities: np.ndarray     # (n_range_bins, n_azimuth_bins), >= 0
    model: SonarModel
    pose: Pose


@dataclass(frozen=True)
class CameraImage:
    rgb: np.ndarray             # (height, width, 3) in [0, 1]
    model: CameraModel
    pose: Pose


def reflection_intensity(alpha, mat: Material) -> np.ndarray | float:
    """Acoustic reflection strength at incidence angle alpha (radians).

    Diffuse lobe C_dl cos(a) plus specular lobe
    C_sl G(a) sec(a) exp(-a^2 / (2 sigma^2)) with the microfacet shadowing
    factor G(a) = min(1, 2 cos^2 a). Grazing angles (a >= pi/2 - 1e-6)
    return 0; the specular spike is deliberately absent.
    """
    a = np.asarray(alpha, dtype=float)
    if np.any(a < 0):
        raise ValueError("incidence angle must be >= 0")
    grazing = a >= GRAZING_LIMIT
    a_safe = np.where(grazing, 0.0, a)
    cos_a = np.cos(a_safe)
    g = np.minimum(1.0, 2.0 * cos_a**2)
    spec = mat.c_sl * g / cos_a * np.exp(-(a_safe**2) / (2.0 * mat.sigma_alpha**2))
    out = np.where(grazing, 0.0, mat.c_dl * cos_a + spec)
    return float(out) if np.isscalar(alpha) else out


def make_trajectory(baseline: float, n_poses: int, standoff: float) -> Trajectory:
    """n_poses rig poses equally spaced on [0, baseline] along world X.

    The camera looks along +Z; the sonar shares the position with its
    elevation axis along -X. The target sits at distance `standoff` in Z.
    """
    if baseline <= 0:
        raise BadConfigError("baseline must be positive")
    if n_poses < 2:
        raise BadConfigError("need at least 2 poses")
    if standoff <= 0:
        raise BadConfigError("standoff must be positive")
    xs = np.linspace(0.0, baseline, n_poses)
    poses = tuple(Pose(np.eye(3), np.array([x, 0.0, 0.0])) for x in xs)
    return Trajectory(poses, baseline, standoff=standoff)


def render_camera_gt(scene: AnalyticScene, cam: CameraModel, pose: Pose,
                     t_max: float = 10.0) -> CameraImage:
    """Sphere-traced RGB image with headlight shading albedo * max(0, n.v)."""
    us, vs = np.meshgrid(np.arange(cam.width), np.arange(cam.height), indexing="xy")
    origins, dirs = camera_rays(cam, pose, us.ravel(), vs.ravel())
    t, hit = sphere_trace(scene, origins, dirs, t_max)
    rgb = np.zeros((cam.height * cam.width, 3))
    if hit.any():
        pts = origins[hit] + t[hit, None] * dirs[hit]
        normals, _ = sdf_normals(scene, pts)
        cos = np.maximum(0.0, np.sum(normals * (-dirs[hit]), axis=1))
        rgb[hit] = np.asarray(scene.material.optical_albedo)[None, :] * cos[:, None]
    return CameraImage(rgb.reshape(cam.height, cam.width, 3), cam, pose)


def render_sonar_gt(scene: AnalyticScene, sonar: SonarModel, pose: Pose,
                    n_phi: int = 256) -> SonarImage:
    """First-return sonar image: no multipath, transmittance is binary.

    For every azimuth-bin center and each of n_phi elevation strata, trace
    the beam ray to the first surface and deposit
    (E_e / r) * reflection(alpha) * dphi into the range bin containing r.
    """
    thetas = sonar.azimuth_centers()
    phis = sonar.elevation_centers(n_phi)
    tt, pp = np.meshgrid(thetas, phis, indexing="ij")        # (A, E)
    dirs_sensor = spherical_to_cartesian(np.ones_like(tt), tt, pp).reshape(-1, 3)
    dirs = dirs_sensor @ pose.R.T
    origins = np.broadcast_to(pose.t, dirs.shape)
    t, hit = sphere_trace(scene, origins, dirs, sonar.r_max)
    img = np.zeros((sonar.n_range_bins, sonar.n_azimuth_bins))
    if hit.any():
        r = t[hit]
        pts = origins[hit] + r[:, None] * dirs[hit]
        normals, _ = sdf_normals(scene, pts)
        cos = np.clip(np.sum(normals * (-dirs[hit]), axis=1), -1.0, 1.0)
        alpha = np.arccos(np.clip(cos, 0.0, 1.0))            # backfaces -> grazing
        alpha[cos <= 0] = np.pi / 2
        intensity = reflection_intensity(alpha, scene.material)
        rbin = sonar.range_bin_of(r)
        abin = np.repeat(np.arange(sonar.n_azimuth_bins), n_phi)[hit]
        keep = rbin >= 0
        dphi = (sonar.phi_max - sonar.phi_min) / n_phi
        deposit = sonar.e_e / r * intensity * dphi
        flat = rbin[keep] * sonar.n_azimuth_bins + abin[keep]
        img = np.bincount(flat, weights=deposit[keep], minlength=img.size).reshape(img.shape)
    return SonarImage(img, sonar, pose)


@dataclass
class SimulationJob:
    """Everything generate_dataset needs, already validated."""

    scene: AnalyticScene
    camera: CameraModel
    sonar: SonarModel
    trajectory: Trajectory
    camera_noise_std: float = 0.0
    sonar_noise_std: float = 0.0
    seed: int = 0
    n_phi: int = 256
    scene_spec: dict = field(default_factory=dict)


def _simulate_pose(job: SimulationJob, i: int) -> tuple[np.ndarray, np.ndarray]:
    cam_img = render_camera_gt(job.scene, job.camera, job.trajectory.camera_pose(i))
    son_img = render_sonar_gt(job.scene, job.sonar, job.trajectory.sonar_pose(i), job.n_phi)
    rgb, son = cam_img.rgb, son_img.intensities
    if job.camera_noise_std > 0:
        rng = stream(job.seed, "noise-cam", i)
        rgb = np.clip(rgb + rng.normal(0.0, job.camera_noise_std, rgb.shape), 0.0, 1.0)
    if job.sonar_noise_std > 0:
        rng = stream(job.seed, "noise-son", i)
        son = np.maximum(son + rng.normal(0.0, job.sonar_noise_std, son.shape), 0.0)
    return rgb, son


def generate_dataset(job: SimulationJob, out_dir, threads: int = 1, progress=None):
    """Write manifest + per-pose camera (PPM) and sonar (PFM) images.

    Per-pose synthesis may run on a thread pool; each pose owns its output
    slot, so results are identical for any thread count. Returns the
    manifest path.
    """
    out_dir = aio.ensure_dir(out_dir)
    aio.ensure_dir(out_dir / "cam")
    aio.ensure_dir(out_dir / "son")
    n = len(job.trajectory)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda i: _simulate_pose(job, i), range(n)))
    else:
        results = [_simulate_pose(job, i) for i in range(n)]

    files = []
    for i, (rgb, son) in enumerate(results):
        cam_name = f"cam/{i:04d}.ppm"
        son_name = f"son/{i:04d}.pfm"
        aio.write_ppm16(out_dir / cam_name, rgb)
        aio.write_pfm(out_dir / son_name, son)
        files.append({"camera": cam_name, "sonar": son_name})
        if progress:
            print(f"pose {i + 1}/{n}", file=sys.stderr)

    manifest = {
        "format": "aofuse-dataset",
        "version": 1,
        "units": {"distance": "meters", "angle": "radians"},
        "seed": job.seed,
        "camera": aio.camera_to_json(job.camera),
        "sonar": aio.sonar_to_json(job.sonar),
        "noise": {"camera_std": job.camera_noise_std, "sonar_std": job.sonar_noise_std},
        "baseline": job.trajectory.baseline,
        "standoff": job.trajectory.standoff,
        "poses": [
            {
                "rig": job.trajectory.poses[i].matrix().reshape(-1).tolist(),
                "camera": job.trajectory.camera_pose(i).matrix().reshape(-1).tolist(),
                "sonar": job.trajectory.sonar_pose(i).matrix().reshape(-1).tolist(),
            }
            for i in range(n)
        ],
        "files": files,
        "scene": job.scene_spec,
    }
    path = out_dir / "manifest.json"
    aio.write_json(path, manifest)
    return path
