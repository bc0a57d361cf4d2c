"""Sensor geometry: poses, camera projection and rays, sonar spherical
coordinates and elevation arcs, and the two-view eight-measurement model
used by the conditioning analysis.

Conventions fixed here:
  * Pose holds a world-from-sensor transform: world = R @ p_sensor + t.
  * Camera: image plane z = f in the sensor frame, metric image coordinates
    x_c = f X / Z, y_c = f Y / Z.
  * Sonar: azimuthal plane is the sensor yz plane; range r = |P|, azimuth
    theta = atan2(y, z), elevation phi = asin(x / r).
  * The two-view analysis uses the sensor-to-sensor convention
    P' = R P + t (first sensor frame == world frame); see analyze module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BehindCameraError,
    DegenerateError,
    OutOfBoundsError,
    RangeOutOfBoundsError,
)

MIN_DEPTH = 1e-9


@dataclass(frozen=True)
class Pose:
    """Rigid world-from-sensor transform."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float).reshape(3, 3)
        t = np.asarray(self.t, dtype=float).reshape(3)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)
        if np.linalg.norm(R.T @ R - np.eye(3)) > 1e-9 or abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("R must be a proper rotation")

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    def to_world(self, p_sensor: np.ndarray) -> np.ndarray:
        return np.asarray(p_sensor, dtype=float) @ self.R.T + self.t

    def to_sensor(self, p_world: np.ndarray) -> np.ndarray:
        return (np.asarray(p_world, dtype=float) - self.t) @ self.R

    def compose(self, other: "Pose") -> "Pose":
        """self ∘ other: apply other first, then self."""
        return Pose(self.R @ other.R, self.R @ other.t + self.t)

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.R
        m[:3, 3] = self.t
        return m

    @classmethod
    def from_matrix(cls, m) -> "Pose":
        m = np.asarray(m, dtype=float).reshape(4, 4)
        return cls(m[:3, :3], m[:3, 3])


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera with a metric image plane at z = f.

    principal is in pixel units; None means the image center (w-1)/2, (h-1)/2.
    """

    f: float
    width: int
    height: int
    pixel_pitch: float
    principal: tuple[float, float] | None = None

    def __post_init__(self):
        if self.f <= 0 or self.pixel_pitch <= 0:
            raise ValueError("f and pixel_pitch must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("image must have at least one pixel")
        if self.principal is None:
            object.__setattr__(
                self, "principal", ((self.width - 1) / 2.0, (self.height - 1) / 2.0)
            )

    def pixel_to_metric(self, u, v):
        cx, cy = self.principal
        return (np.asarray(u, dtype=float) - cx) * self.pixel_pitch, (
            np.asarray(v, dtype=float) - cy
        ) * self.pixel_pitch


@dataclass(frozen=True)
class SonarModel:
    """Forward-looking imaging sonar: polar (range, azimuth) image grid.

    Azimuth spans [-azimuth_fov/2, +azimuth_fov/2]; elevation aperture is
    [phi_min, phi_max] (default +-6 degrees). e_e is the emitted acoustic
    energy scale.
    """

    r_min: float
    r_max: float
    n_range_bins: int
    azimuth_fov: float
    n_azimuth_bins: int
    phi_min: float = -np.deg2rad(6.0)
    phi_max: float = np.deg2rad(6.0)
    e_e: float = 1.0

    def __post_init__(self):
        if not 0 < self.r_min < self.r_max:
            raise ValueError("need 0 < r_min < r_max")
        if self.phi_min >= self.phi_max:
            raise ValueError("need phi_min < phi_max")
        if self.n_range_bins < 1 or self.n_azimuth_bins < 1:
            raise ValueError("bin counts must be >= 1")
        if self.azimuth_fov <= 0:
            raise ValueError("azimuth_fov must be positive")

    @property
    def range_bin_width(self) -> float:
        return (self.r_max - self.r_min) / self.n_range_bins

    def range_bin_of(self, r) -> np.ndarray:
        """Bin index for ranges r; -1 where r falls outside [r_min, r_max)."""
        r = np.asarray(r, dtype=float)
        idx = np.floor((r - self.r_min) / self.range_bin_width).astype(int)
        idx[(r < self.r_min) | (idx >= self.n_range_bins)] = -1
        return idx

    def azimuth_centers(self) -> np.ndarray:
        half = self.azimuth_fov / 2
        w = self.azimuth_fov / self.n_azimuth_bins
        return -half + (np.arange(self.n_azimuth_bins) + 0.5) * w

    def elevation_centers(self, n_phi: int) -> np.ndarray:
        w = (self.phi_max - self.phi_min) / n_phi
        return self.phi_min + (np.arange(n_phi) + 0.5) * w


@dataclass(frozen=True)
class TwoViewObservation:
    """The eight measurements of one point seen from two sensor positions."""

    x_c: float
    y_c: float
    r1: float
    theta1: float
    x_c2: float
    y_c2: float
    r2: float
    theta2: float

    def __post_init__(self):
        if self.r1 <= 0 or self.r2 <= 0:
            raise ValueError("ranges must be positive")

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.x_c, self.y_c, self.r1, self.theta1, self.x_c2, self.y_c2, self.r2, self.theta2]
        )

    @classmethod
    def from_array(cls, a) -> "TwoViewObservation":
        return cls(*(float(v) for v in np.asarray(a, dtype=float)))


def camera_project(cam: CameraModel, p_sensor) -> tuple[float, float]:
    """Metric image-plane coordinates (x_c, y_c) = f * (X, Y) / Z."""
    x, y, z = np.asarray(p_sensor, dtype=float)
    if z <= MIN_DEPTH:
        raise BehindCameraError(f"depth {z} <= {MIN_DEPTH}")
    return cam.f * x / z, cam.f * y / z


def camera_ray(cam: CameraModel, pose: Pose, pixel) -> tuple[np.ndarray, np.ndarray]:
    """World-space (origin, unit direction) of the ray through a pixel."""
    u, v = pixel
    if not (0 <= u <= cam.width - 1 and 0 <= v <= cam.height - 1):
        raise OutOfBoundsError(f"pixel {pixel} outside {cam.width}x{cam.height}")
    xm, ym = cam.pixel_to_metric(u, v)
    d = np.array([float(xm), float(ym), cam.f])
    d /= np.linalg.norm(d)
    return pose.t.copy(), pose.R @ d


def camera_rays(cam: CameraModel, pose: Pose, us, vs) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized camera_ray for pixel arrays; returns (origins, dirs) (N, 3)."""
    xm, ym = cam.pixel_to_metric(np.asarray(us), np.asarray(vs))
    d = np.stack([xm, ym, np.full_like(xm, cam.f)], axis=-1)
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    dirs = d @ pose.R.T
    origins = np.broadcast_to(pose.t, dirs.shape).copy()
    return origins, dirs


def sonar_project(p_sensor) -> tuple[float, float, float]:
    """(r, theta, phi) of a sensor-frame point; azimuthal plane is yz."""
    p = np.asarray(p_sensor, dtype=float)
    r = float(np.linalg.norm(p))
    if r <= MIN_DEPTH:
        raise DegenerateError("point at the sensor origin")
    theta = float(np.arctan2(p[1], p[2]))
    phi = float(np.arcsin(np.clip(p[0] / r, -1.0, 1.0)))
    return r, theta, phi


def spherical_to_cartesian(r, theta, phi) -> np.ndarray:
    """Sensor-frame point(s) at (r, theta, phi); inverse of sonar_project."""
    r = np.asarray(r, dtype=float)
    sin_phi, cos_phi = np.sin(phi), np.cos(phi)
    return np.stack(
        [r * sin_phi, r * cos_phi * np.sin(theta), r * cos_phi * np.cos(theta)], axis=-1
    )


def arc_points(
    sonar: SonarModel, pose: Pose, r: float, theta: float, n: int, rng=None
) -> np.ndarray:
    """n world points on the elevation arc at fixed (r, theta).

    Elevations are stratified over [phi_min, phi_max]: one per stratum, at
    the stratum center, or jittered within it when rng is given.
    """
    if not sonar.r_min <= r <= sonar.r_max:
        raise RangeOutOfBoundsError(f"range {r} outside [{sonar.r_min}, {sonar.r_max}]")
    if n < 1:
        raise ValueError("n must be >= 1")
    width = (sonar.phi_max - sonar.phi_min) / n
    offsets = rng.uniform(size=n) if rng is not None else np.full(n, 0.5)
    phis = sonar.phi_min + (np.arange(n) + offsets) * width
    return pose.to_world(spherical_to_cartesian(np.full(n, float(r)), theta, phis))


def observe_two_view(f: float, R, t, P) -> TwoViewObservation:
    """Project P through both sensor positions (second frame: P' = R P + t).

    r2 is evaluated through the quadratic identity
    r2 = sqrt(r1^2 + |t|^2 + 2 t.(R P)), which equals |R P + t|.
    """
    R = np.asarray(R, dtype=float).reshape(3, 3)
    t = np.asarray(t, dtype=float).reshape(3)
    P = np.asarray(P, dtype=float).reshape(3)
    p2 = R @ P + t
    if P[2] <= MIN_DEPTH or p2[2] <= MIN_DEPTH:
        raise BehindCameraError("point not in front of both cameras")
    r1 = np.linalg.norm(P)
    if r1 <= MIN_DEPTH or np.linalg.norm(p2) <= MIN_DEPTH:
        raise DegenerateError("point at a sensor origin")
    x_c = f * P[0] / P[2]
    y_c = f * P[1] / P[2]
    theta1 = np.arctan2(P[1], P[2])
    r2 = np.sqrt(r1**2 + t @ t + 2.0 * t @ (R @ P))
    x_c2 = f * p2[0] / p2[2]
    y_c2 = f * p2[1] / p2[2]
    theta2 = np.arctan2(p2[1], p2[2])
    return TwoViewObservation(
        float(x_c), float(y_c), float(r1), float(theta1),
        float(x_c2), float(y_c2), float(r2), float(theta2),
    )
