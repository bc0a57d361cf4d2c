"""Voxel field: trilinear sampling, analytic adjoints, initialization."""

import numpy as np
import pytest

from aofuse.field import (
    FieldModel,
    GradientBuffer,
    GridAdjoint,
    grid_backprop,
    grid_sample,
)


def make_field(rng, res=6):
    return FieldModel(
        bbox_min=[0.0, 0.0, 0.0],
        bbox_max=[1.0, 1.0, 1.0],
        sdf=rng.normal(size=(res,) * 3),
        acoustic=rng.random((res,) * 3),
        optical=rng.random((res, res, res, 3)),
        log_q=np.log(20.0),
    )


class TestGridSample:
    def test_node_values_verbatim(self):
        rng = np.random.default_rng(0)
        f = make_field(rng)
        # node (2, 3, 4) of a 6^3 grid over the unit cube
        x = np.array([2, 3, 4]) / 5.0
        gs = grid_sample(f, x)
        assert gs.sdf == pytest.approx(f.sdf[2, 3, 4], abs=1e-12)
        assert gs.acoustic == pytest.approx(f.acoustic[2, 3, 4], abs=1e-12)
        np.testing.assert_allclose(gs.optical, f.optical[2, 3, 4], atol=1e-12)

    def test_cell_center_is_mean_of_corners(self):
        rng = np.random.default_rng(1)
        f = make_field(rng)
        x = (np.array([1, 2, 3]) + 0.5) / 5.0
        gs = grid_sample(f, x)
        assert gs.sdf == pytest.approx(f.sdf[1:3, 2:4, 3:5].mean(), abs=1e-12)

    def test_linear_field_gradient_exact(self):
        f = FieldModel([0, 0, 0], [1, 1, 1], np.zeros((5, 5, 5)),
                       np.zeros((5, 5, 5)), np.zeros((5, 5, 5, 3)), 0.0)
        ax = np.linspace(0, 1, 5)
        f.sdf[:] = ax[None, None, :] - 0.5
        rng = np.random.default_rng(2)
        gs = grid_sample(f, rng.random((20, 3)) * 0.98 + 0.01)
        np.testing.assert_allclose(gs.grad, [[0, 0, 1.0]] * 20, atol=1e-12)
        assert not gs.out_of_box.any()

    def test_out_of_box_pushes_positive(self):
        rng = np.random.default_rng(3)
        f = make_field(rng)
        x = np.array([[1.5, 0.5, 0.5]])
        gs = grid_sample(f, x)
        assert gs.out_of_box[0]
        inside = grid_sample(f, np.array([[1.0, 0.5, 0.5]]))
        assert gs.sdf[0] == pytest.approx(inside.sdf[0] + 0.5, abs=1e-12)

    def test_continuity_across_cell_boundary(self):
        rng = np.random.default_rng(4)
        f = make_field(rng)
        # approach a node plane from both sides with shrinking pairs
        for eps in (1e-4, 1e-7, 1e-10):
            a = grid_sample(f, np.array([0.4 - eps, 0.33, 0.71]))
            b = grid_sample(f, np.array([0.4 + eps, 0.33, 0.71]))
            assert abs(a.sdf - b.sdf) < 20 * eps

    def test_spatial_gradient_matches_fd(self):
        rng = np.random.default_rng(5)
        f = make_field(rng)
        pts = rng.random((30, 3)) * 0.9 + 0.05
        gs = grid_sample(f, pts)
        h = 1e-7
        for ax in range(3):
            e = np.zeros(3)
            e[ax] = h
            fd = (grid_sample(f, pts + e).sdf - grid_sample(f, pts - e).sdf) / (2 * h)
            np.testing.assert_allclose(fd, gs.grad[:, ax], atol=1e-5)


class TestGridBackprop:
    def test_delta_at_node(self):
        rng = np.random.default_rng(6)
        f = make_field(rng)
        buf = GradientBuffer.zeros_like(f)
        x = np.array([[2 / 5, 3 / 5, 4 / 5]])
        grid_backprop(f, x, GridAdjoint(d_sdf=np.ones(1)), buf)
        assert buf.d_sdf[2, 3, 4] == pytest.approx(1.0)
        assert buf.d_sdf.sum() == pytest.approx(1.0)

    def test_cell_center_splits_evenly(self):
        rng = np.random.default_rng(7)
        f = make_field(rng)
        buf = GradientBuffer.zeros_like(f)
        x = (np.array([[1, 2, 3]]) + 0.5) / 5.0
        grid_backprop(f, x, GridAdjoint(d_sdf=np.ones(1)), buf)
        np.testing.assert_allclose(buf.d_sdf[1:3, 2:4, 3:5], 0.125, atol=1e-12)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(8)
        f = make_field(rng)
        pts = rng.random((9, 3))
        up = GridAdjoint(
            d_sdf=rng.normal(size=9),
            d_grad=rng.normal(size=(9, 3)),
            d_acoustic=rng.normal(size=9),
            d_optical=rng.normal(size=(9, 3)),
        )
        buf = GradientBuffer.zeros_like(f)
        grid_backprop(f, pts, up, buf)

        def loss():
            gs = grid_sample(f, pts)
            return (
                (up.d_sdf * gs.sdf).sum() + (up.d_grad * gs.grad).sum()
                + (up.d_acoustic * gs.acoustic).sum() + (up.d_optical * gs.optical).sum()
            )

        h = 1e-6
        for _ in range(40):
            i, j, k = rng.integers(0, 6, 3)
            kind = rng.integers(0, 3)
            if kind == 0:
                arr, an = f.sdf, buf.d_sdf[i, j, k]
            elif kind == 1:
                arr, an = f.acoustic, buf.d_acoustic[i, j, k]
            else:
                ch = rng.integers(0, 3)
                f.optical[i, j, k, ch] += h
                lp = loss()
                f.optical[i, j, k, ch] -= 2 * h
                lm = loss()
                f.optical[i, j, k, ch] += h
                fd = (lp - lm) / (2 * h)
                an = buf.d_optical[i, j, k, ch]
                assert fd == pytest.approx(an, rel=1e-6, abs=1e-9)
                continue
            arr[i, j, k] += h
            lp = loss()
            arr[i, j, k] -= 2 * h
            lm = loss()
            arr[i, j, k] += h
            fd = (lp - lm) / (2 * h)
            assert fd == pytest.approx(an, rel=1e-6, abs=1e-9)


class TestInitialization:
    def test_q_positive_and_log_stored(self):
        f = FieldModel.initialize([0, 0, 0], [1, 1, 1], 8, q_init=20.0)
        assert f.q == pytest.approx(20.0)
        f.log_q = -50.0
        assert f.q > 0.0

    def test_initial_sphere_one_sign_change_outward(self):
        f = FieldModel.initialize([-1, -1, -1], [1, 1, 1], 16)
        rng = np.random.default_rng(9)
        center = (f.bbox_min + f.bbox_max) / 2
        for _ in range(30):
            d = rng.normal(size=3)
            d /= np.linalg.norm(d)
            ts = np.linspace(0.0, 0.97, 120)
            vals = grid_sample(f, center + ts[:, None] * d).sdf
            changes = np.sum(np.sign(vals[:-1]) != np.sign(vals[1:]))
            assert changes == 1

    def test_for_bounds_padding_is_cubic(self):
        f = FieldModel.for_bounds([0, 0, 1], [1, 0.5, 2], resolution=8, padding=0.2)
        ext = f.bbox_max - f.bbox_min
        assert ext[0] == pytest.approx(ext[1]) == pytest.approx(ext[2])
        assert ext[0] == pytest.approx(1.2)
        assert np.all(f.bbox_min <= [0, 0, 1]) and np.all(f.bbox_max >= [1, 0.5, 2])

    def test_validation(self):
        with pytest.raises(ValueError):
            FieldModel([0, 0, 0], [1, 1, 1], np.zeros((1, 4, 4)),
                       np.zeros((1, 4, 4)), np.zeros((1, 4, 4, 3)), 0.0)
        with pytest.raises(ValueError):
            FieldModel([0, 0, 0], [1, 1, 1], np.zeros((4, 4, 4)),
                       np.zeros((5, 4, 4)), np.zeros((4, 4, 4, 3)), 0.0)
