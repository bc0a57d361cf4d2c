"""File formats: PPM16, PFM, PLY, checkpoints, dataset round trips."""

import numpy as np
import pytest

from aofuse import io as aio
from aofuse.errors import BadDatasetError
from aofuse.field import FieldModel


class TestPpm:
    def test_round_trip_quantized(self, tmp_path):
        rng = np.random.default_rng(0)
        img = rng.random((7, 5, 3))
        aio.write_ppm16(tmp_path / "a.ppm", img)
        back = aio.read_ppm16(tmp_path / "a.ppm")
        assert back.shape == img.shape
        np.testing.assert_allclose(back, img, atol=0.5 / 65535)

    def test_sixteen_bit_values_survive(self, tmp_path):
        # exact multiples of 1/65535 survive the round trip bit for bit
        img = np.zeros((1, 4, 3))
        img[0, :, 0] = np.array([0, 1, 32768, 65535]) / 65535.0
        aio.write_ppm16(tmp_path / "b.ppm", img)
        back = aio.read_ppm16(tmp_path / "b.ppm")
        np.testing.assert_array_equal(back[0, :, 0], img[0, :, 0])

    def test_rejects_wrong_magic(self, tmp_path):
        (tmp_path / "c.ppm").write_bytes(b"P5\n1 1\n255\n\x00")
        with pytest.raises(ValueError):
            aio.read_ppm16(tmp_path / "c.ppm")


class TestPfm:
    def test_round_trip_float32_exact(self, tmp_path):
        rng = np.random.default_rng(1)
        img = rng.random((9, 6)).astype(np.float32).astype(float)
        aio.write_pfm(tmp_path / "a.pfm", img)
        back = aio.read_pfm(tmp_path / "a.pfm")
        np.testing.assert_array_equal(back, img)

    def test_header_is_little_endian_scale(self, tmp_path):
        aio.write_pfm(tmp_path / "b.pfm", np.ones((2, 3)))
        with open(tmp_path / "b.pfm", "rb") as f:
            assert f.readline().strip() == b"Pf"
            assert f.readline().split() == [b"3", b"2"]
            assert float(f.readline()) == -1.0


class TestPly:
    def test_round_trip(self, tmp_path):
        verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1.5]])
        faces = np.array([[0, 1, 2], [1, 2, 3]])
        aio.write_ply(tmp_path / "m.ply", verts, faces)
        v, f = aio.read_ply(tmp_path / "m.ply")
        np.testing.assert_allclose(v, verts, atol=1e-6)
        np.testing.assert_array_equal(f, faces)


class TestCheckpoint:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(2)
        f = FieldModel(
            bbox_min=[-0.2, 0.1, 1.0], bbox_max=[0.8, 1.1, 2.0],
            sdf=rng.normal(size=(4, 5, 6)),
            acoustic=rng.random((4, 5, 6)),
            optical=rng.random((4, 5, 6, 3)),
            log_q=1.2345,
        )
        aio.save_checkpoint(tmp_path / "ck.bin", f)
        g = aio.load_checkpoint(tmp_path / "ck.bin")
        np.testing.assert_array_equal(g.sdf, f.sdf)
        np.testing.assert_array_equal(g.acoustic, f.acoustic)
        np.testing.assert_array_equal(g.optical, f.optical)
        np.testing.assert_array_equal(g.bbox_min, f.bbox_min)
        assert g.log_q == f.log_q

    def test_magic_and_version_checked(self, tmp_path):
        (tmp_path / "bad.bin").write_bytes(b"XXXX" + b"\x00" * 100)
        with pytest.raises(ValueError):
            aio.load_checkpoint(tmp_path / "bad.bin")


class TestDataset:
    def test_missing_manifest_raises(self, tmp_path):
        with pytest.raises(BadDatasetError):
            aio.load_dataset(tmp_path)

    def test_wrong_format_raises(self, tmp_path):
        aio.write_json(tmp_path / "manifest.json", {"format": "something-else"})
        with pytest.raises(BadDatasetError):
            aio.load_dataset(tmp_path)
