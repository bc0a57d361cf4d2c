"""Shared fixtures: small scenes, fields, and sensor models."""

import numpy as np
import pytest

from aofuse.field import FieldModel
from aofuse.scene import AnalyticScene, Material, Primitive
from aofuse.sensors import CameraModel, SonarModel


@pytest.fixture
def unit_sphere_scene():
    return AnalyticScene((Primitive("sphere", (0.0, 0.0, 0.0), (1.0,)),))


@pytest.fixture
def two_sphere_scene():
    return AnalyticScene(
        (
            Primitive("sphere", (0.0, 0.0, 0.0), (1.0,)),
            Primitive("sphere", (3.0, 0.0, 0.0), (1.0,)),
        )
    )


@pytest.fixture
def desk_scene():
    """Sphere + box near (0, 0, 1.75), the default experiment target."""
    return AnalyticScene(
        (
            Primitive("sphere", (-0.06, -0.05, 1.75), (0.28,)),
            Primitive("box", (0.32, 0.08, 1.72), (0.36, 0.44, 0.30)),
        ),
        Material(optical_albedo=(0.7, 0.7, 0.7)),
    )


@pytest.fixture
def small_random_field():
    rng = np.random.default_rng(7)
    res = 6
    return FieldModel(
        bbox_min=[-0.5, -0.5, 0.5],
        bbox_max=[0.5, 0.5, 1.5],
        sdf=rng.normal(scale=0.3, size=(res,) * 3),
        acoustic=rng.random((res,) * 3),
        optical=rng.random((res, res, res, 3)),
        log_q=np.log(15.0),
    )


@pytest.fixture
def default_camera():
    return CameraModel(f=0.1, width=64, height=48, pixel_pitch=1.1e-3)


@pytest.fixture
def default_sonar():
    return SonarModel(
        r_min=1.2, r_max=2.2, n_range_bins=64, azimuth_fov=np.deg2rad(45.0),
        n_azimuth_bins=64, e_e=5.0,
    )
