"""Analytic scene SDFs: exactness, union semantics, normals, tracing."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aofuse.scene import (
    AnalyticScene,
    Material,
    Primitive,
    sdf_eval,
    sdf_normal,
    sdf_normals,
    sphere_trace,
)

finite_coord = st.floats(-3.0, 3.0, allow_nan=False)


def test_sphere_center_value(unit_sphere_scene):
    assert sdf_eval(unit_sphere_scene, [0.0, 0.0, 0.0]) == pytest.approx(-1.0)


def test_sphere_outside_value(unit_sphere_scene):
    assert sdf_eval(unit_sphere_scene, [2.0, 0.0, 0.0]) == pytest.approx(1.0)


def test_union_is_min_of_members(two_sphere_scene):
    # halfway between the two spheres, both members give 0.5
    assert sdf_eval(two_sphere_scene, [1.5, 0.0, 0.0]) == pytest.approx(0.5)
    rng = np.random.default_rng(0)
    pts = rng.uniform(-2, 5, (200, 3))
    member_min = np.min([p.sdf(pts) for p in two_sphere_scene.primitives], axis=0)
    np.testing.assert_allclose(sdf_eval(two_sphere_scene, pts), member_min)


def test_sphere_sdf_exact_at_machine_precision(unit_sphere_scene):
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(100, 3))
    expected = np.linalg.norm(pts, axis=1) - 1.0
    np.testing.assert_allclose(sdf_eval(unit_sphere_scene, pts), expected, rtol=0, atol=1e-15)


def test_box_sdf_exact_values():
    box = AnalyticScene((Primitive("box", (0, 0, 0), (2.0, 2.0, 2.0)),))
    assert sdf_eval(box, [0, 0, 0]) == pytest.approx(-1.0)
    assert sdf_eval(box, [2.0, 0, 0]) == pytest.approx(1.0)
    # corner distance
    assert sdf_eval(box, [2.0, 2.0, 2.0]) == pytest.approx(np.sqrt(3.0))


def test_torus_and_capsule_surface_zero():
    torus = AnalyticScene((Primitive("torus", (0, 0, 0), (1.0, 0.25)),))
    assert sdf_eval(torus, [1.25, 0, 0]) == pytest.approx(0.0, abs=1e-12)
    cap = AnalyticScene((Primitive("capsule", (0, 0, 0), (0.5, 0.2)),))
    assert sdf_eval(cap, [0.2, 0, 0]) == pytest.approx(0.0, abs=1e-12)
    assert sdf_eval(cap, [0, 0, 0.7]) == pytest.approx(0.0, abs=1e-12)


def test_sphere_normal_is_radial(unit_sphere_scene):
    np.testing.assert_allclose(
        sdf_normal(unit_sphere_scene, [0, 0, 2.0]), [0, 0, 1.0], atol=1e-9
    )


def test_box_face_normal():
    box = AnalyticScene((Primitive("box", (0, 0, 0), (2.0, 2.0, 2.0)),))
    np.testing.assert_allclose(sdf_normal(box, [1.0, 0.1, -0.2]), [1, 0, 0], atol=1e-7)


def test_normal_matches_analytic_radial_gradient(unit_sphere_scene):
    x = np.array([1.0, 1.0, 0.0]) / np.sqrt(2.0) * 1.5
    np.testing.assert_allclose(
        sdf_normal(unit_sphere_scene, x), x / np.linalg.norm(x), atol=1e-9
    )


def test_normals_unit_norm_and_degenerate_flag(unit_sphere_scene):
    rng = np.random.default_rng(2)
    pts = rng.normal(size=(50, 3)) * 1.5
    n, deg = sdf_normals(unit_sphere_scene, pts)
    np.testing.assert_allclose(np.linalg.norm(n, axis=1), 1.0, atol=1e-9)
    assert not deg.any()
    # exact center: gradient vanishes, fixed fallback returned
    n, deg = sdf_normals(unit_sphere_scene, np.zeros((1, 3)))
    assert deg[0]
    np.testing.assert_allclose(n[0], [1, 0, 0])


@settings(max_examples=60, deadline=None)
@given(
    x=st.tuples(finite_coord, finite_coord, finite_coord),
    y=st.tuples(finite_coord, finite_coord, finite_coord),
)
def test_union_sdf_is_1_lipschitz(x, y):
    scene = AnalyticScene(
        (
            Primitive("sphere", (0.0, 0.0, 0.0), (1.0,)),
            Primitive("box", (1.5, 0.2, -0.3), (1.0, 0.8, 0.6)),
        )
    )
    dx = np.linalg.norm(np.subtract(x, y))
    df = abs(sdf_eval(scene, list(x)) - sdf_eval(scene, list(y)))
    assert df <= dx + 1e-9


def test_sphere_trace_hits_surface(desk_scene):
    rng = np.random.default_rng(3)
    origins = np.zeros((64, 3))
    targets = rng.uniform(-0.3, 0.3, (64, 3)) + [0.1, 0.0, 1.75]
    dirs = targets - origins
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    t, hit = sphere_trace(desk_scene, origins, dirs, t_max=5.0)
    assert hit.any()
    pts = origins[hit] + t[hit, None] * dirs[hit]
    assert np.max(np.abs(sdf_eval(desk_scene, pts))) < 1e-6


def test_sphere_trace_miss_returns_tmax(unit_sphere_scene):
    t, hit = sphere_trace(unit_sphere_scene, [[0, 0, -3.0]], [[0, 1.0, 0.0]], t_max=4.0)
    assert not hit[0] and t[0] == pytest.approx(4.0)


def test_material_validation():
    with pytest.raises(ValueError):
        Material(c_dl=-0.1)
    with pytest.raises(ValueError):
        Material(sigma_alpha=0.0)
    with pytest.raises(ValueError):
        Material(optical_albedo=(1.2, 0.0, 0.0))


def test_primitive_validation():
    with pytest.raises(ValueError):
        Primitive("cone", (0, 0, 0), (1.0,))
    with pytest.raises(ValueError):
        Primitive("sphere", (0, 0, 0), (-1.0,))


def test_rotated_box_sdf():
    from aofuse.scene import rotation_from_ypr

    rot = rotation_from_ypr(np.pi / 4, 0.0, 0.0)
    box = AnalyticScene((Primitive("box", (0, 0, 0), (2.0, 2.0, 2.0), rot),))
    # rotated +x face center now sits at R @ (1,0,0)
    face = rot @ np.array([1.0, 0, 0])
    assert sdf_eval(box, face) == pytest.approx(0.0, abs=1e-12)
    assert sdf_eval(box, 2.0 * face) == pytest.approx(1.0, abs=1e-12)
