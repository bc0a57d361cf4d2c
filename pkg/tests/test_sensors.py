"""Sensor geometry: projections, rays, spherical coordinates, two-view model."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aofuse.errors import (
    BehindCameraError,
    DegenerateError,
    OutOfBoundsError,
    RangeOutOfBoundsError,
)
from aofuse.scene import rotation_from_ypr
from aofuse.sensors import (
    CameraModel,
    Pose,
    SonarModel,
    arc_points,
    camera_project,
    camera_ray,
    observe_two_view,
    sonar_project,
    spherical_to_cartesian,
)

angle = st.floats(-0.5, 0.5)


class TestPose:
    def test_rejects_non_rotation(self):
        with pytest.raises(ValueError):
            Pose(np.eye(3) * 2.0, np.zeros(3))
        with pytest.raises(ValueError):
            Pose(np.diag([1.0, 1.0, -1.0]), np.zeros(3))  # det = -1

    def test_round_trip(self):
        pose = Pose(rotation_from_ypr(0.3, -0.2, 0.1), np.array([1.0, 2.0, 3.0]))
        p = np.random.default_rng(0).normal(size=(10, 3))
        np.testing.assert_allclose(pose.to_sensor(pose.to_world(p)), p, atol=1e-12)

    def test_matrix_round_trip(self):
        pose = Pose(rotation_from_ypr(0.1, 0.2, 0.3), np.array([-1.0, 0.5, 2.0]))
        again = Pose.from_matrix(pose.matrix())
        np.testing.assert_allclose(again.R, pose.R)
        np.testing.assert_allclose(again.t, pose.t)


class TestCameraProject:
    def test_on_axis(self):
        cam = CameraModel(f=0.1, width=64, height=48, pixel_pitch=1e-3)
        assert camera_project(cam, [0, 0, 1.5]) == pytest.approx((0.0, 0.0))

    def test_off_axis_value(self):
        cam = CameraModel(f=0.1, width=64, height=48, pixel_pitch=1e-3)
        x_c, y_c = camera_project(cam, [0.15, 0.0, 1.5])
        assert x_c == pytest.approx(0.01)
        assert y_c == pytest.approx(0.0)

    def test_behind_camera(self):
        cam = CameraModel(f=0.1, width=64, height=48, pixel_pitch=1e-3)
        with pytest.raises(BehindCameraError):
            camera_project(cam, [0, 0, -1.0])

    @settings(max_examples=50, deadline=None)
    @given(
        x=st.floats(-1, 1), y=st.floats(-1, 1), z=st.floats(0.5, 3.0),
        lam=st.floats(0.1, 10.0),
    )
    def test_scale_invariant_along_rays(self, x, y, z, lam):
        cam = CameraModel(f=0.1, width=64, height=48, pixel_pitch=1e-3)
        a = camera_project(cam, [x, y, z])
        b = camera_project(cam, [lam * x, lam * y, lam * z])
        assert a == pytest.approx(b, rel=1e-9, abs=1e-12)


class TestCameraRay:
    def test_principal_point_is_optical_axis(self, default_camera):
        origin, d = camera_ray(default_camera, Pose.identity(), default_camera.principal)
        np.testing.assert_allclose(origin, 0.0)
        np.testing.assert_allclose(d, [0, 0, 1.0], atol=1e-12)

    def test_translation_moves_origin_only(self, default_camera):
        pose = Pose(np.eye(3), np.array([1.0, 0.0, 0.0]))
        origin, d = camera_ray(default_camera, pose, default_camera.principal)
        np.testing.assert_allclose(origin, [1, 0, 0])
        np.testing.assert_allclose(d, [0, 0, 1.0], atol=1e-12)

    def test_out_of_bounds(self, default_camera):
        with pytest.raises(OutOfBoundsError):
            camera_ray(default_camera, Pose.identity(), (-1.0, 0.0))

    def test_project_unproject_round_trip(self, default_camera):
        pose = Pose(rotation_from_ypr(0.2, -0.1, 0.05), np.array([0.3, -0.2, 0.1]))
        rng = np.random.default_rng(4)
        for _ in range(25):
            u = rng.uniform(0, default_camera.width - 1)
            v = rng.uniform(0, default_camera.height - 1)
            origin, d = camera_ray(default_camera, pose, (u, v))
            p_world = origin + rng.uniform(0.5, 5.0) * d
            x_c, y_c = camera_project(default_camera, pose.to_sensor(p_world))
            xm, ym = default_camera.pixel_to_metric(u, v)
            assert abs(x_c - xm) < 1e-9 and abs(y_c - ym) < 1e-9


class TestSonarProject:
    def test_on_axis(self):
        assert sonar_project([0, 0, 1.5]) == pytest.approx((1.5, 0.0, 0.0))

    def test_azimuth_quarter(self):
        r, th, ph = sonar_project([0, 1.0, 1.0])
        assert (r, th, ph) == pytest.approx((np.sqrt(2.0), np.pi / 4, 0.0))

    def test_pure_elevation(self):
        r, th, ph = sonar_project([1.0, 0, 0])
        assert (r, th, ph) == pytest.approx((1.0, 0.0, np.pi / 2))

    def test_degenerate_origin(self):
        with pytest.raises(DegenerateError):
            sonar_project([0, 0, 0])

    @settings(max_examples=80, deadline=None)
    @given(
        r=st.floats(0.1, 10.0),
        theta=st.floats(-3.0, 3.0),
        phi=st.floats(-1.4, 1.4),
    )
    def test_spherical_round_trip(self, r, theta, phi):
        p = spherical_to_cartesian(r, theta, phi)
        r2, th2, ph2 = sonar_project(p)
        assert r2 == pytest.approx(r, rel=1e-9)
        assert th2 == pytest.approx(theta, abs=1e-9)
        assert ph2 == pytest.approx(phi, abs=1e-9)


class TestArcPoints:
    def test_degenerate_single_point(self):
        sonar = SonarModel(1.0, 3.0, 8, 1.0, 8, phi_min=0.0, phi_max=1e-12)
        pts = arc_points(sonar, Pose.identity(), 2.0, 0.0, 1)
        np.testing.assert_allclose(pts, [[0, 0, 2.0]], atol=1e-10)

    def test_arc_lies_on_range_sphere(self, default_sonar):
        pts = arc_points(default_sonar, Pose.identity(), 2.0, 0.0, 3)
        np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 2.0, atol=1e-12)

    def test_round_trip_consistency(self, default_sonar):
        pose = Pose(rotation_from_ypr(0.1, 0.3, -0.2), np.array([0.5, -0.1, 0.2]))
        rng = np.random.default_rng(8)
        pts = arc_points(default_sonar, pose, 1.7, 0.25, 9, rng=rng)
        for p in pts:
            r, th, ph = sonar_project(pose.to_sensor(p))
            assert r == pytest.approx(1.7, abs=1e-9)
            assert th == pytest.approx(0.25, abs=1e-9)
            assert default_sonar.phi_min <= ph <= default_sonar.phi_max

    def test_range_out_of_bounds(self, default_sonar):
        with pytest.raises(RangeOutOfBoundsError):
            arc_points(default_sonar, Pose.identity(), 0.5, 0.0, 4)


class TestObserveTwoView:
    def test_identity_transform(self):
        obs = observe_two_view(0.1, np.eye(3), np.zeros(3), [0, 0, 1.5])
        assert obs.x_c == obs.y_c == obs.x_c2 == obs.y_c2 == 0.0
        assert obs.r1 == obs.r2 == pytest.approx(1.5)
        assert obs.theta1 == obs.theta2 == 0.0

    def test_pure_x_translation(self):
        obs = observe_two_view(0.1, np.eye(3), [0.1, 0, 0], [0, 0, 1.5])
        assert obs.x_c2 == pytest.approx(0.1 * 0.1 / 1.5)  # ~0.006667
        assert obs.r2 == pytest.approx(np.sqrt(1.5**2 + 0.01 + 0.0))

    def test_behind_camera(self):
        with pytest.raises(BehindCameraError):
            observe_two_view(0.1, np.eye(3), np.zeros(3), [0, 0, -1.5])

    @settings(max_examples=60, deadline=None)
    @given(yaw=angle, pitch=angle, roll=angle,
           tx=st.floats(-0.2, 0.2), ty=st.floats(-0.2, 0.2), tz=st.floats(-0.2, 0.2),
           px=st.floats(-0.5, 0.5), py=st.floats(-0.5, 0.5), pz=st.floats(1.0, 2.0))
    def test_range_formula_identity(self, yaw, pitch, roll, tx, ty, tz, px, py, pz):
        # r2 computed through the quadratic identity must equal |R P + t|
        rot = rotation_from_ypr(yaw, pitch, roll)
        t = np.array([tx, ty, tz])
        p = np.array([px, py, pz])
        obs = observe_two_view(0.1, rot, t, p)
        assert obs.r2 == pytest.approx(np.linalg.norm(rot @ p + t), rel=1e-9)
